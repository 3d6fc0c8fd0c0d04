#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "tl2e/sim.hpp"
#include "tl2e/tensor_io.hpp"

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace tl2e;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / "tl2e_cli_test.log";
    const std::string cmd = std::string(TL2E_CLI_PATH) + " " + args + " > " + log.string() +
                            " 2>&1";
    const int rc = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "tl2e_cli_work";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string meta_field(const std::string& meta, const std::string& key) {
    std::istringstream is(meta);
    std::string k, v;
    while (is >> k >> v)
        if (k == key) return v;
    return {};
}

}  // namespace

TEST_CASE("simulate with no corruption round-trips the clean tensor") {
    const fs::path dir = work_dir();
    const std::string prefix = (dir / "clean").string();
    const RunResult r = run_cli("simulate --model tucker --dims 6,6,6 --rank 2,2,2 --seed 5 --out " +
                                prefix);
    REQUIRE(r.exit_code == 0);

    const MaskedTensor data = read_tensor_file(prefix + ".tensor");
    CHECK(data.observed_count() == 216);

    nlohmann::json truth = nlohmann::json::parse(slurp(prefix + ".truth"));
    const std::vector<double> l = truth["low_rank"].get<std::vector<double>>();
    REQUIRE(l.size() == data.values.size());
    for (std::size_t i = 0; i < l.size(); ++i) CHECK(data.values[i] == l[i]);
    CHECK(truth["outlier_indices"].size() == 0);
}

TEST_CASE("simulate is deterministic per seed and counts outliers by rounding") {
    const fs::path dir = work_dir();
    const std::string a = (dir / "sim_a").string();
    const std::string b = (dir / "sim_b").string();
    const std::string args = "simulate --model cp --dims 10,10,10 --rank 3 --delta 0.25 "
                             "--rho 0.1 --seed 11 --out ";
    REQUIRE(run_cli(args + a).exit_code == 0);
    REQUIRE(run_cli(args + b).exit_code == 0);
    CHECK(slurp(a + ".tensor") == slurp(b + ".tensor"));
    CHECK(slurp(a + ".truth") == slurp(b + ".truth"));

    nlohmann::json truth = nlohmann::json::parse(slurp(a + ".truth"));
    CHECK(truth["outlier_indices"].size() == 250);
    CHECK(truth["missing_indices"].size() == 100);
}

TEST_CASE("decompose recovers a clean generated tensor and is byte-deterministic") {
    const fs::path dir = work_dir();
    const std::string sim_prefix = (dir / "dec_in").string();
    REQUIRE(run_cli("simulate --model tucker --dims 10,10,10 --rank 2,2,2 --seed 21 --out " +
                    sim_prefix)
                .exit_code == 0);

    const std::string fit_a = (dir / "dec_a").string();
    const std::string fit_b = (dir / "dec_b").string();
    const std::string args =
        " --rank 2,2,2 --seed 4 --out ";
    REQUIRE(run_cli("decompose " + sim_prefix + ".tensor" + args + fit_a).exit_code == 0);
    REQUIRE(run_cli("decompose " + sim_prefix + ".tensor" + args + fit_b).exit_code == 0);

    // byte-identical outputs, objective field in particular
    CHECK(slurp(fit_a + ".meta") == slurp(fit_b + ".meta"));
    CHECK(meta_field(slurp(fit_a + ".meta"), "status") == "converged");
    CHECK(meta_field(slurp(fit_a + ".meta"), "objective") ==
          meta_field(slurp(fit_b + ".meta"), "objective"));

    // fitted tensor close to the generator's ground truth
    nlohmann::json truth = nlohmann::json::parse(slurp(sim_prefix + ".truth"));
    const std::vector<double> lv = truth["low_rank"].get<std::vector<double>>();
    const MaskedTensor lhat = read_tensor_file(fit_a + ".Lhat");
    const DenseTensor l({10, 10, 10}, lv);
    CHECK(relative_error(lhat.values, l) < 1e-4);

    // model file parses back
    const L2EModel model = read_model_file(fit_a + ".model");
    CHECK(model.factors.ranks() == std::vector<int>{2, 2, 2});
}

TEST_CASE("decompose validates rank against the input dimensions") {
    const fs::path dir = work_dir();
    const std::string sim_prefix = (dir / "val_in").string();
    REQUIRE(run_cli("simulate --model tucker --dims 10,10,10 --rank 2,2,2 --seed 3 --out " +
                    sim_prefix)
                .exit_code == 0);
    const RunResult r = run_cli("decompose " + sim_prefix + ".tensor --rank 11,2,2 --out " +
                                (dir / "val_out").string());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("mode 1") != std::string::npos);
}

TEST_CASE("malformed input exits 1 with a line-numbered diagnostic") {
    const fs::path dir = work_dir();
    const fs::path bad = dir / "bad.tensor";
    std::ofstream(bad) << "2\n2 2\n1.0\noops\n3.0\n4.0\n";
    const RunResult r = run_cli("decompose " + bad.string() + " --rank 1,1 --out " +
                                (dir / "bad_out").string());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("bad.tensor:4") != std::string::npos);
}

TEST_CASE("decompose exits 2 when stopped by the iteration cap") {
    const fs::path dir = work_dir();
    const std::string sim_prefix = (dir / "cap_in").string();
    REQUIRE(run_cli("simulate --model tucker --dims 8,8,8 --rank 2,2,2 --delta 0.2 --seed 9 "
                    "--out " +
                    sim_prefix)
                .exit_code == 0);
    const RunResult r = run_cli("decompose " + sim_prefix + ".tensor --rank 2,2,2 --max-iter 3 "
                                "--out " +
                                (dir / "cap_out").string());
    CHECK(r.exit_code == 2);
    CHECK(meta_field(slurp((dir / "cap_out").string() + ".meta"), "status") == "max_iters");
}

TEST_CASE("feature-extraction preset caps the precision at 20") {
    const fs::path dir = work_dir();
    const std::string sim_prefix = (dir / "fe_in").string();
    REQUIRE(run_cli("simulate --model tucker --dims 8,8,8 --rank 2,2,2 --seed 13 --out " +
                    sim_prefix)
                .exit_code == 0);
    const std::string out = (dir / "fe_out").string();
    REQUIRE(run_cli("decompose " + sim_prefix + ".tensor --rank 2,2,2 --preset "
                    "feature-extraction --out " +
                    out)
                .exit_code == 0);
    const double eta = std::stod(meta_field(slurp(out + ".meta"), "eta_star"));
    CHECK(eta <= std::log(20.0) + 1e-12);
}

TEST_CASE("sweep with a one-cell custom grid emits a header and one row") {
    const fs::path dir = work_dir();
    const fs::path csv = dir / "sweep.csv";
    const RunResult r = run_cli(
        "sweep --preset rank-sweep --dims 6,6,6 --ranks 2 --deltas 0.1 --models tucker "
        "--rho 0 --replicates 1 --seed 2 --out " +
        csv.string());
    REQUIRE(r.exit_code == 0);
    std::istringstream is(slurp(csv));
    std::string line;
    std::size_t lines = 0;
    while (std::getline(is, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 2);

    const RunResult bad = run_cli("sweep --preset nonsense --out " + csv.string());
    CHECK(bad.exit_code == 1);
}

TEST_CASE("cv reports the single candidate as argmin and validates K") {
    const fs::path dir = work_dir();
    const std::string sim_prefix = (dir / "cv_in").string();
    REQUIRE(run_cli("simulate --model tucker --dims 8,8,8 --rank 2,2,2 --delta 0.05 --seed 31 "
                    "--out " +
                    sim_prefix)
                .exit_code == 0);
    const fs::path csv = dir / "cv.csv";
    const RunResult r = run_cli("cv " + sim_prefix + ".tensor --ranks 2,2,2 --k 4 --seed 1 "
                                "--jobs 2 --out " +
                                csv.string());
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("argmin rank: 2x2x2") != std::string::npos);
    const std::string body = slurp(csv);
    CHECK(body.find("2x2x2,argmin") != std::string::npos);
    CHECK(body.find(",aggregate") != std::string::npos);

    const RunResult bad = run_cli("cv " + sim_prefix + ".tensor --ranks 2,2,2 --k 100000 --out " +
                                  csv.string());
    CHECK(bad.exit_code == 1);
}
