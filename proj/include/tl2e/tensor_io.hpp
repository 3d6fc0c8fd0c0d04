#pragma once

#include "tl2e/l2e.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace tl2e {

/// Raised on malformed tensor files; the message carries the offending line.
class TensorFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Text tensor format: line 1 the order N, line 2 the N dims, then one value
/// per line in first-index-fastest order. The token `nan` (any case) marks a
/// missing entry (mask 0). Values are written with shortest round-trip
/// precision, so write(read(f)) preserves every value and the mask.
MaskedTensor read_tensor_file(std::istream& in, const std::string& name = "<stream>");
MaskedTensor read_tensor_file(const std::filesystem::path& path);

void write_tensor_file(std::ostream& out, const MaskedTensor& data);
void write_tensor_file(const std::filesystem::path& path, const MaskedTensor& data);

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

/// Fitted-model text layout: order, dims, ranks, eta, scale, then the core
/// values and each factor matrix (column-major), one value per line.
void write_model_file(const std::filesystem::path& path, const L2EModel& model);
L2EModel read_model_file(const std::filesystem::path& path);

}  // namespace tl2e
