#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "gca/cli.hpp"
#include "gca/matio.hpp"
#include "gca/solver.hpp"
#include "json.hpp"
#include "test_util.hpp"

using gca::DenseMatrix;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome gca_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = gca::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, HelpExitsZero) {
  EXPECT_EQ(gca_run({"--help"}).code, 0);
  const Outcome r = gca_run({"solve", "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--epsilon"), std::string::npos);
}

TEST(Cli, BadFlagsExitTwo) {
  EXPECT_EQ(gca_run({}).code, 2);
  EXPECT_EQ(gca_run({"frobnicate"}).code, 2);
  EXPECT_EQ(gca_run({"solve", "--bogus"}).code, 2);
}

TEST(Cli, SolveSymmetricKernel) {
  gca::testing::TempDir dir;
  gca::write_matrix(DenseMatrix{{0.9, 0.2}, {0.2, 0.9}}, dir / "k.csv");
  const Outcome r = gca_run({"solve", "--kernel", (dir / "k.csv").string(), "--epsilon", "1", "--tol", "1e-14", "-o",
                         (dir / "p.csv").string(), "--diagnostics", (dir / "d.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const DenseMatrix p = gca::read_matrix(dir / "p.csv");
  EXPECT_NEAR(p(0, 0), 0.9 / 1.1, 1e-12);
  EXPECT_NEAR(p(0, 1), 0.2 / 1.1, 1e-12);
  const auto d = nlohmann::json::parse(slurp(dir / "d.json"));
  EXPECT_TRUE(d["converged"].get<bool>());
  EXPECT_FALSE(d["trajectory"].empty());
}

TEST(Cli, SolveErrors) {
  gca::testing::TempDir dir;
  const Outcome missing = gca_run({"solve", "--cost", (dir / "nope.csv").string()});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("nope.csv"), std::string::npos);
  gca::write_matrix(DenseMatrix{{0, 1}, {1, 0}}, dir / "c.csv");
  EXPECT_EQ(gca_run({"solve", "--cost", (dir / "c.csv").string(), "--tol", "1e-6", "--iters", "3"}).code, 2);
  EXPECT_EQ(gca_run({"solve"}).code, 2);
}

TEST(Cli, UotLimits) {
  gca::testing::TempDir dir;
  std::mt19937_64 rng(1);
  const DenseMatrix c = gca::testing::uniform_positive(6, 6, rng, 0.0, 2.0);
  gca::write_matrix(c, dir / "c.csv");
  const std::string cost = (dir / "c.csv").string();
  ASSERT_EQ(gca_run({"solve", "--cost", cost, "-o", (dir / "s.csv").string()}).code, 0);
  ASSERT_EQ(gca_run({"uot", "--cost", cost, "--lambda1", "1e4", "--lambda2", "1e4", "-o", (dir / "u.csv").string()})
                .code,
            0);
  EXPECT_LE(gca::max_abs_diff(gca::read_matrix(dir / "s.csv"), gca::read_matrix(dir / "u.csv")), 1e-3);

  ASSERT_EQ(gca_run({"uot", "--cost", cost, "--lambda1", "0", "--lambda2", "0", "-o", (dir / "z.csv").string()}).code,
            0);
  const gca::GibbsKernel k = gca::gibbs_kernel(gca::CostMatrix(c), 0.5);
  EXPECT_LE(gca::max_abs_diff(gca::read_matrix(dir / "z.csv"), gca::project_cols(k.values(), gca::Vector(6, 1.0))),
            1e-12);
  EXPECT_EQ(gca_run({"uot", "--cost", cost, "--lambda1", "-1"}).code, 2);
}

TEST(Cli, LossOrthonormalPairs) {
  gca::testing::TempDir dir;
  gca::write_matrix(DenseMatrix{{1, 0}, {0, 1}}, dir / "z.csv");
  const std::string z = (dir / "z.csv").string();
  gca::write_matrix(DenseMatrix{{0, 1}, {1, 0}}, dir / "w.csv");
  const Outcome r = gca_run({"loss", "--loss", "ince", "--epsilon", "1", "--z1", z, "--z2", (dir / "w.csv").string(),
                         "--plan-out", (dir / "p.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  // Swapped rows: each anchor's positive is orthogonal, its negative identical.
  EXPECT_NEAR(std::stod(r.out), 2.0 * std::log1p(std::exp(1.0)), 1e-12);
  EXPECT_TRUE(std::filesystem::exists(dir / "p.csv"));

  const Outcome same = gca_run({"loss", "--loss", "ince", "--epsilon", "1", "--z1", z, "--z2", z});
  EXPECT_NEAR(std::stod(same.out), 2.0 * std::log1p(std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(std::stod(same.out), 0.626523, 1e-6);
}

TEST(Cli, LossErrors) {
  gca::testing::TempDir dir;
  gca::write_matrix(DenseMatrix{{1, 0}, {0, 1}}, dir / "z.csv");
  gca::write_matrix(DenseMatrix{{1, 0, 0}, {0, 1, 0}}, dir / "w.csv");
  const std::string z = (dir / "z.csv").string();
  EXPECT_EQ(gca_run({"loss", "--loss", "nce", "--z1", z, "--z2", z}).code, 2);
  EXPECT_EQ(gca_run({"loss", "--z1", z, "--z2", (dir / "w.csv").string()}).code, 2);
}

TEST(Cli, PlanBlock) {
  const Outcome r = gca_run({"plan", "--domains", "0,0,1,1", "--alpha", "0.5", "--beta", "0", "--raw"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(gca::parse_matrix_csv(r.out), (DenseMatrix{{1, 0.5, 0, 0}, {0.5, 1, 0, 0}, {0, 0, 1, 0.5}, {0, 0, 0.5, 1}}));
  const Outcome n = gca_run({"plan", "--domains", "0,0,1,1", "--alpha", "0.5"});
  EXPECT_NEAR(gca::total(gca::parse_matrix_csv(n.out)), 4.0, 1e-14);
  EXPECT_EQ(gca_run({"plan", "--domains", "0,x"}).code, 2);
}

TEST(Cli, TrainZeroEpochsAndDeterminism) {
  gca::testing::TempDir dir;
  const std::vector<std::string> base{"train", "--epochs", "0", "--per-cell", "10", "--batch", "16", "--seed", "4"};
  auto with_metrics = [&](const char* name) {
    auto a = base;
    a.push_back("--metrics");
    a.push_back((dir / name).string());
    return a;
  };
  ASSERT_EQ(gca_run(with_metrics("m0.jsonl")).code, 0);
  const std::string m0 = slurp(dir / "m0.jsonl");
  EXPECT_NE(m0.find("\"step\":0"), std::string::npos);
  EXPECT_EQ(std::count(m0.begin(), m0.end(), '\n'), 2);  // init metrics and the probe

  auto two = base;
  two[2] = "2";
  two.push_back("--metrics");
  two.push_back((dir / "a.jsonl").string());
  ASSERT_EQ(gca_run(two).code, 0);
  two.back() = (dir / "b.jsonl").string();
  ASSERT_EQ(gca_run(two).code, 0);
  EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
}

TEST(Cli, VerifyExitCodes) {
  gca::testing::TempDir dir;
  const Outcome good = gca_run({"verify", "--n", "4", "--properties", "half_step_ince,dual_kl_identity", "--report",
                            (dir / "r.json").string()});
  EXPECT_EQ(good.code, 0) << good.out;
  const auto rep = nlohmann::json::parse(slurp(dir / "r.json"));
  EXPECT_TRUE(rep["passed"].get<bool>());
  EXPECT_EQ(rep["properties"].size(), 2u);

  const Outcome strict = gca_run({"verify", "--n", "4", "--properties", "proximal_rince", "--tolerance-scale", "0"});
  EXPECT_EQ(strict.code, 1) << strict.out;
  EXPECT_EQ(gca_run({"verify", "--properties", "no_such_property"}).code, 2);
}

TEST(Cli, VerifySeedReproducible) {
  const std::vector<std::string> a{"verify", "--n", "5", "--seed", "9", "--properties", "kl_monotone"};
  EXPECT_EQ(gca_run(a).out, gca_run(a).out);
}
