#include <doctest.h>

#include "pmlda/cli.hpp"
#include "pmlda/core.hpp"
#include "pmlda/io.hpp"
#include "pmlda/metrics.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

using namespace pmlda;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / ("pmlda_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Small scene shared by the unmix tests.
fs::path scene() {
  static const fs::path dir = [] {
    const fs::path d = scratch("scene");
    const Result r = call({"generate", "--out-dir", d.string(), "--rows", "12", "--cols", "10",
                           "--bands", "6", "--K", "3", "--block", "4", "--seed", "3"});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

std::vector<std::string> unmix_args(const fs::path &out) {
  return {"unmix",  "--cube", (scene() / "scene.hdr").string(), "--T", "40", "--K", "3",
          "--seed", "5",      "--out-dir",                      out.string()};
}

} // namespace

TEST_CASE("generate writes a scene with the declared dimensions") {
  const fs::path dir = scene();
  const HyperspectralCube cube = io::read_cube(dir / "scene.hdr");
  CHECK(cube.rows() == 12);
  CHECK(cube.cols() == 10);
  CHECK(cube.bands() == 6);
  CHECK(io::read_segmentation(dir / "segmentation.csv").label_count() == 9);
  const TruthRecord truth = io::read_truth(dir / "truth.json");
  CHECK(truth.model.topics() == 3);
  CHECK(io::read_matrix_csv(dir / "truth_proportions.csv").rows() == 120);
}

TEST_CASE("unmix writes every output and is reproducible") {
  const fs::path a = scratch("unmix_a");
  const fs::path b = scratch("unmix_b");
  const Result ra = call(unmix_args(a));
  REQUIRE_MESSAGE(ra.code == 0, ra.err);
  auto args = unmix_args(b);
  args.insert(args.end(), {"--threads", "3"});
  REQUIRE(call(args).code == 0);

  for (const char *name : {"endmembers.csv", "proportions.csv", "documents.csv", "trace.csv",
                           "model.txt", "metrics.txt", "metrics.csv", "proportion_0.pgm",
                           "proportion_2.pgm"}) {
    CHECK_MESSAGE(fs::exists(a / name), name);
    CHECK_MESSAGE(slurp(a / name) == slurp(b / name), name);
  }
  CHECK(io::read_matrix_csv(a / "proportions.csv").rows() == 120);

  const fs::path c = scratch("unmix_env");
  ::setenv("PMLDA_THREADS", "2", 1);
  REQUIRE(call(unmix_args(c)).code == 0);
  ::unsetenv("PMLDA_THREADS");
  CHECK(slurp(a / "proportions.csv") == slurp(c / "proportions.csv"));
  CHECK(io::read_endmember_csv(a / "endmembers.csv").cols() == 3);
  CHECK(ra.out.find("entropy_mean=") != std::string::npos);
}

TEST_CASE("unmix defaults") {
  const fs::path out = scratch("defaults");
  // only T is lowered; burn-in defaults to T / 2
  REQUIRE(call({"unmix", "--cube", (scene() / "scene.hdr").string(), "--T", "20", "--out-dir",
                out.string()})
              .code == 0);
  const io::KeyValues model = io::read_key_values(out / "model.txt");
  CHECK(model.at("alpha") == "5");
  CHECK(model.at("lambda") == "1");
  CHECK(model.at("K") == "3");
  CHECK(model.at("burn_in") == "10");
  CHECK(model.at("mode") == "normalized");
  CHECK(model.at("estimator") == "mean");

  const Result help = call({"unmix", "--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("2000") != std::string::npos);
}

TEST_CASE("a single endmember takes every proportion") {
  const fs::path out = scratch("k1");
  auto args = unmix_args(out);
  args[6] = "1";
  REQUIRE(call(args).code == 0);
  const Eigen::MatrixXd p = io::read_matrix_csv(out / "proportions.csv");
  CHECK(p.cols() == 1);
  CHECK((p.array() == 1.0).all());
}

TEST_CASE("evaluate agrees with the library") {
  const fs::path out = scratch("eval");
  REQUIRE(call(unmix_args(out)).code == 0);
  const Result r = call({"evaluate", "--results", out.string(), "--cube",
                         (scene() / "scene.hdr").string(), "--truth",
                         (scene() / "truth.json").string(), "--out",
                         (out / "report.txt").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const io::KeyValues report = io::read_key_values(out / "report.txt");
  const Eigen::MatrixXd p = io::read_matrix_csv(out / "proportions.csv").transpose();
  CHECK(std::abs(std::stod(report.at("entropy")) - proportion_entropy(p)) < 1e-9);
  const io::KeyValues metrics = io::read_key_values(out / "metrics.txt");
  CHECK(std::stod(report.at("ncm_log_likelihood")) ==
        doctest::Approx(std::stod(metrics.at("ncm_log_likelihood_mean"))).epsilon(1e-9));
  CHECK(report.count("sad_mean_deg") == 1);
  CHECK(report.count("proportion_rmse") == 1);
}

TEST_CASE("evaluate the truth against itself") {
  const fs::path out = scratch("self");
  const Result r = call({"evaluate", "--proportions",
                         (scene() / "truth_proportions.csv").string(), "--endmembers",
                         (scene() / "truth_endmembers.csv").string(), "--truth",
                         (scene() / "truth.json").string(), "--out",
                         (out / "r.txt").string()});
  REQUIRE(r.code == 0);
  const io::KeyValues report = io::read_key_values(out / "r.txt");
  CHECK(std::stod(report.at("sad_mean_deg")) < 1e-9);
  CHECK(std::stod(report.at("proportion_rmse")) < 1e-12);
  CHECK(report.at("assignment") == "0,1,2");

  std::ofstream(out / "hot.csv") << "1,0\n0,1\n1,0\n";
  const Result hot = call({"evaluate", "--proportions", (out / "hot.csv").string()});
  CHECK(hot.out == "entropy=0\n");
}

TEST_CASE("exit codes") {
  const fs::path out = scratch("codes");
  CHECK(call({}).code == cli::kUsage);
  CHECK(call({"unmix", "--out-dir", out.string()}).code == cli::kUsage);
  CHECK(call({"unmix", "--cube", (out / "none.hdr").string(), "--out-dir", out.string()}).code ==
        cli::kIoFailure);
  auto args = unmix_args(out);
  args.insert(args.end(), {"--alpha", "-1"});
  CHECK(call(args).code == cli::kUsage);
  args = unmix_args(out);
  args.insert(args.end(), {"--mode", "bogus"});
  CHECK(call(args).code == cli::kUsage);
  args = unmix_args(out);
  args.insert(args.end(), {"--K", "500"});
  CHECK(call(args).code == cli::kUsage);
  CHECK(call({"unmix", "--config", (out / "missing.cfg").string()}).code == cli::kIoFailure);
}

TEST_CASE("config file values sit below explicit flags") {
  const fs::path out = scratch("config");
  std::ofstream(out / "run.cfg") << "alpha=2.5\nlambda=3\nT=20\n";
  auto args = unmix_args(out / "res");
  args.insert(args.end(), {"--config", (out / "run.cfg").string()});
  REQUIRE(call(args).code == 0);
  const io::KeyValues model = io::read_key_values(out / "res" / "model.txt");
  CHECK(model.at("alpha") == "2.5");
  CHECK(model.at("lambda") == "3");
  CHECK(model.at("T") == "40"); // explicit --T wins
}
