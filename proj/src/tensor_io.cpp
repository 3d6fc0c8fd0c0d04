#include "tl2e/tensor_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tl2e {

namespace {

[[noreturn]] void fail(const std::string& name, std::size_t line, const std::string& what) {
    throw TensorFileError(name + ":" + std::to_string(line) + ": " + what);
}

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool is_nan_token(std::string t) {
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    return t == "nan";
}

double parse_value(const std::string& name, std::size_t line, const std::string& tok) {
    double v = 0.0;
    const auto* first = tok.data();
    const auto* last = tok.data() + tok.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        fail(name, line, "expected a numeric value, got '" + tok + "'");
    return v;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

MaskedTensor read_tensor_file(std::istream& in, const std::string& name) {
    std::size_t lineno = 0;
    std::string line;

    auto next_line = [&](const char* what) {
        while (std::getline(in, line)) {
            ++lineno;
            line = trimmed(line);
            if (!line.empty() && line[0] != '#') return;
        }
        fail(name, lineno + 1, std::string("unexpected end of file, expected ") + what);
    };

    next_line("the tensor order");
    int order = 0;
    {
        std::istringstream ss(line);
        if (!(ss >> order) || order < 1) fail(name, lineno, "order must be a positive integer");
        std::string extra;
        if (ss >> extra) fail(name, lineno, "trailing tokens after the order");
    }

    next_line("the dimension list");
    std::vector<int> dims;
    {
        std::istringstream ss(line);
        int d = 0;
        while (ss >> d) {
            if (d < 1) fail(name, lineno, "dimensions must be positive");
            dims.push_back(d);
        }
        if (!ss.eof()) fail(name, lineno, "dimensions must be integers");
        if (static_cast<int>(dims.size()) != order)
            fail(name, lineno,
                 "expected " + std::to_string(order) + " dims, got " + std::to_string(dims.size()));
    }

    std::size_t total = 1;
    for (int d : dims) total *= static_cast<std::size_t>(d);

    DenseTensor values(dims);
    DenseTensor mask(dims);
    std::size_t observed = 0;
    for (std::size_t i = 0; i < total; ++i) {
        next_line("a tensor value");
        if (is_nan_token(line)) {
            values[i] = 0.0;
            mask[i] = 0.0;
        } else {
            values[i] = parse_value(name, lineno, line);
            mask[i] = 1.0;
            ++observed;
        }
    }
    while (std::getline(in, line)) {
        ++lineno;
        if (!trimmed(line).empty()) fail(name, lineno, "extra data past the declared entry count");
    }
    if (observed == 0) fail(name, lineno, "tensor has no observed entries");
    return MaskedTensor{std::move(values), std::move(mask)};
}

MaskedTensor read_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw TensorFileError("cannot open '" + path.string() + "' for reading");
    return read_tensor_file(in, path.string());
}

void write_tensor_file(std::ostream& out, const MaskedTensor& data) {
    data.validate();
    out << data.values.order() << '\n';
    for (int n = 0; n < data.values.order(); ++n) {
        if (n) out << ' ';
        out << data.values.dim(n);
    }
    out << '\n';
    for (std::size_t i = 0; i < data.values.size(); ++i) {
        if (data.mask[i] == 0.0)
            out << "nan\n";
        else
            out << format_double(data.values[i]) << '\n';
    }
}

void write_tensor_file(const std::filesystem::path& path, const MaskedTensor& data) {
    std::ofstream out(path);
    if (!out) throw TensorFileError("cannot open '" + path.string() + "' for writing");
    write_tensor_file(out, data);
    if (!out.flush()) throw TensorFileError("write failed for '" + path.string() + "'");
}

void write_model_file(const std::filesystem::path& path, const L2EModel& model) {
    model.factors.validate();
    std::ofstream out(path);
    if (!out) throw TensorFileError("cannot open '" + path.string() + "' for writing");
    const auto dims = model.factors.dims();
    const auto ranks = model.factors.ranks();
    out << "order " << dims.size() << '\n';
    out << "dims";
    for (int d : dims) out << ' ' << d;
    out << '\n' << "ranks";
    for (int r : ranks) out << ' ' << r;
    out << '\n';
    out << "eta " << format_double(model.eta) << '\n';
    out << "scale " << format_double(model.scale_s) << '\n';
    out << "core " << model.factors.core.size() << '\n';
    for (std::size_t i = 0; i < model.factors.core.size(); ++i)
        out << format_double(model.factors.core[i]) << '\n';
    for (std::size_t n = 0; n < model.factors.factors.size(); ++n) {
        const DenseMatrix& a = model.factors.factors[n];
        out << "factor " << (n + 1) << ' ' << a.rows() << ' ' << a.cols() << '\n';
        for (Eigen::Index i = 0; i < a.size(); ++i) out << format_double(a.data()[i]) << '\n';
    }
    if (!out.flush()) throw TensorFileError("write failed for '" + path.string() + "'");
}

L2EModel read_model_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw TensorFileError("cannot open '" + path.string() + "' for reading");
    const std::string name = path.string();

    auto expect_key = [&](const char* key) {
        std::string k;
        if (!(in >> k) || k != key)
            throw TensorFileError(name + ": expected '" + key + "', got '" + k + "'");
    };

    L2EModel model;
    expect_key("order");
    std::size_t order = 0;
    in >> order;
    expect_key("dims");
    std::vector<int> dims(order);
    for (auto& d : dims) in >> d;
    expect_key("ranks");
    std::vector<int> ranks(order);
    for (auto& r : ranks) in >> r;
    expect_key("eta");
    in >> model.eta;
    expect_key("scale");
    in >> model.scale_s;
    expect_key("core");
    std::size_t core_len = 0;
    in >> core_len;
    DenseTensor core(ranks);
    if (core.size() != core_len) throw TensorFileError(name + ": core length mismatch");
    for (std::size_t i = 0; i < core_len; ++i) in >> core[i];
    model.factors.core = std::move(core);
    model.factors.factors.resize(order);
    for (std::size_t n = 0; n < order; ++n) {
        expect_key("factor");
        std::size_t id = 0;
        Eigen::Index rows = 0, cols = 0;
        in >> id >> rows >> cols;
        if (id != n + 1 || rows != dims[n] || cols != ranks[n])
            throw TensorFileError(name + ": factor header mismatch");
        DenseMatrix a(rows, cols);
        for (Eigen::Index i = 0; i < a.size(); ++i) in >> a.data()[i];
        model.factors.factors[n] = std::move(a);
    }
    if (!in) throw TensorFileError(name + ": truncated model file");
    model.factors.validate();
    return model;
}

}  // namespace tl2e
