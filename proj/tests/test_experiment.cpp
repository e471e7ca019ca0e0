/*
 * Copyright 2026 The clipsgd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "clipsgd/error.hpp"
#include "clipsgd/experiment.hpp"

namespace clipsgd {
namespace {

namespace fs = std::filesystem;

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("clipsgd_test_" +
            std::string(::testing::UnitTest::GetInstance()
                            ->current_test_info()
                            ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  static std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
  }

  int exec(Mode mode, const fs::path& cfg, const fs::path& out,
           std::size_t threads = 1, std::uint64_t offset = 0) {
    CommandOptions opt;
    opt.out = out;
    opt.threads = threads;
    opt.seed_offset = offset;
    std::ostringstream err;
    const int code = run_command(mode, cfg, opt, err);
    last_err_ = err.str();
    return code;
  }

  fs::path dir_;
  std::string last_err_;
};

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

TEST(ParseConfig, KeysAndLists) {
  const ExperimentConfig c = parse(
      "# comment\n"
      "mode = sweep\n"
      "problem = chi_square\n"
      "dim = 10\n"
      "method = clipped_sgd\n"
      "c = 1e-4, 0.01 ,10\n"
      "eta=0.5\n"
      "seeds = 3, 1\n"
      "T = 1000\n"
      "intercept = true\n");
  EXPECT_EQ(c.mode, Mode::kSweep);
  EXPECT_EQ(c.problem.name, "chi_square");
  EXPECT_EQ(c.problem.dim, 10u);
  EXPECT_EQ(c.method, Method::kClippedSgd);
  EXPECT_EQ(c.c, (std::vector<double>{1e-4, 0.01, 10}));
  EXPECT_EQ(c.eta, (std::vector<double>{0.5}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 1}));
  EXPECT_EQ(c.T, 1000u);
  EXPECT_TRUE(c.problem.logistic.intercept);
}

TEST(ParseConfig, Errors) {
  EXPECT_THROW(parse("colour = red\n"), ConfigError);
  EXPECT_THROW(parse("T = 5\nT = 6\n"), ConfigError);
  EXPECT_THROW(parse("T = -1\n"), ConfigError);
  EXPECT_THROW(parse("T = 1.5\n"), ConfigError);
  EXPECT_THROW(parse("eta = 0.1,,0.2\n"), ConfigError);
  EXPECT_THROW(parse("eta = \n"), ConfigError);
  EXPECT_THROW(parse("method = adam\n"), ConfigError);
  EXPECT_THROW(parse("just words\n"), ConfigError);
  EXPECT_THROW(parse("seeds = \n"), ConfigError);
  EXPECT_THROW(parse("sigma_dp = 1\nmethod = clipped_sgd\n"), ConfigError);
  EXPECT_THROW(parse("dp_epsilon = 1\nmethod = dp_sgd\n"), ConfigError);
}

TEST_F(ExperimentTest, RunClippedHalfNormExample) {
  const auto cfg = write("run.cfg",
                         "problem = quadratic\nmethod = clipped_gd\n"
                         "c = 0.25\neta = 1\nT = 2\nx0 = 1\n");
  ASSERT_EQ(exec(Mode::kRun, cfg, dir_ / "out.csv"), kExitOk) << last_err_;
  EXPECT_EQ(slurp(dir_ / "out.csv"),
            "iter,f_val,grad_norm,applied_norm,clipped_fraction\n"
            "0,0.5,1,0.25,1\n"
            "1,0.28125,0.75,0.25,1\n"
            "2,0.125,0.5,0,0\n");
}

TEST_F(ExperimentTest, RunZeroIterations) {
  const auto cfg = write("run.cfg",
                         "problem = quadratic\nmethod = clipped_gd\n"
                         "c = 0.25\neta = 1\nT = 0\nx0 = 1\n");
  ASSERT_EQ(exec(Mode::kRun, cfg, dir_ / "out.csv"), kExitOk) << last_err_;
  EXPECT_EQ(lines(slurp(dir_ / "out.csv")).size(), 2u);
}

TEST_F(ExperimentTest, RunIsDeterministic) {
  const auto cfg = write("run.cfg",
                         "problem = chi_square\nmethod = clipped_sgd\n"
                         "c = 1\neta = 0.01\nT = 500\nB = 3\nseeds = 8\n");
  ASSERT_EQ(exec(Mode::kRun, cfg, dir_ / "a.csv"), kExitOk) << last_err_;
  ASSERT_EQ(exec(Mode::kRun, cfg, dir_ / "b.csv"), kExitOk);
  EXPECT_EQ(slurp(dir_ / "a.csv"), slurp(dir_ / "b.csv"));
  ASSERT_EQ(exec(Mode::kRun, cfg, dir_ / "c.csv", 1, 1), kExitOk);
  EXPECT_NE(slurp(dir_ / "a.csv"), slurp(dir_ / "c.csv"));
}

TEST_F(ExperimentTest, ExitCodes) {
  const auto bad = write("bad.cfg", "nonsense = 1\n");
  EXPECT_EQ(exec(Mode::kRun, bad, dir_ / "o.csv"), kExitConfig);
  const auto missing = write("missing.cfg",
                             "problem = logistic\ndataset = " +
                                 (dir_ / "nope.svm").string() +
                                 "\nmethod = gd\n");
  EXPECT_EQ(exec(Mode::kRun, missing, dir_ / "o.csv"), kExitData);
  const auto diverge = write("div.cfg",
                             "problem = quadratic\nmethod = gd\neta = 3\n"
                             "T = 1000\nx0 = 1\n");
  EXPECT_EQ(exec(Mode::kRun, diverge, dir_ / "o.csv"), kExitDivergence);
  const auto wrong_mode = write("mode.cfg", "mode = sweep\nmethod = gd\n");
  EXPECT_EQ(exec(Mode::kRun, wrong_mode, dir_ / "o.csv"), kExitConfig);
  const auto clipped_no_c = write("noc.cfg", "method = clipped_gd\n");
  EXPECT_EQ(exec(Mode::kRun, clipped_no_c, dir_ / "o.csv"), kExitConfig);
}

TEST_F(ExperimentTest, SweepSingleCellMatchesRun) {
  const std::string body =
      "problem = bernoulli_shift\nmethod = clipped_sgd\nc = 2\neta = 0.05\n"
      "T = 300\nseeds = 4\nx0 = 3\n";
  const auto run_cfg = write("run.cfg", body);
  const auto sweep_cfg = write("sweep.cfg", body);
  ASSERT_EQ(exec(Mode::kRun, run_cfg, dir_ / "r.csv"), kExitOk);
  ASSERT_EQ(exec(Mode::kSweep, sweep_cfg, dir_ / "s.csv"), kExitOk);
  const auto trace = lines(slurp(dir_ / "r.csv"));
  const auto sweep = lines(slurp(dir_ / "s.csv"));
  ASSERT_EQ(sweep.size(), 2u);
  // final_f and final_grad_norm of the sweep row equal the trace's last row.
  const std::string last = trace.back();
  const auto f_pos = last.find(',');
  const std::string f_and_g =
      last.substr(f_pos + 1, last.find(',', last.find(',', f_pos + 1) + 1) -
                                 f_pos - 1);
  EXPECT_NE(sweep[1].find(f_and_g), std::string::npos)
      << sweep[1] << " vs " << f_and_g;
}

TEST_F(ExperimentTest, SweepDeterministicProblemSameAcrossSeeds) {
  const auto cfg = write("sweep.cfg",
                         "problem = quadratic\ndim = 3\nL = 2\n"
                         "method = clipped_gd\nc = 0.5\neta = 0.1\nT = 50\n"
                         "seeds = 1, 2\nx0 = 1\n");
  ASSERT_EQ(exec(Mode::kSweep, cfg, dir_ / "s.csv"), kExitOk);
  const auto rows = lines(slurp(dir_ / "s.csv"));
  ASSERT_EQ(rows.size(), 3u);
  auto strip_seed = [](const std::string& r) {
    const auto a = r.find(',', r.find(',') + 1);
    const auto b = r.find(',', a + 1);
    return r.substr(0, a) + r.substr(b);
  };
  EXPECT_EQ(strip_seed(rows[1]), strip_seed(rows[2]));
}

TEST_F(ExperimentTest, SweepTargetAndBestEta) {
  const auto cfg = write("sweep.cfg",
                         "problem = quadratic\nmethod = clipped_gd\n"
                         "c = 0.1, 1\neta = 0.1, 0.5\nT = 1000\nx0 = 0.5\n"
                         "target_grad_norm = 0.6\n");
  ASSERT_EQ(exec(Mode::kSweep, cfg, dir_ / "s.csv", 3), kExitOk);
  const auto rows = lines(slurp(dir_ / "s.csv"));
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    // iters_to_target = 0 because the start already meets the target.
    EXPECT_NE(rows[i].find(",0,0.1,"), std::string::npos) << rows[i];
  }
}

TEST_F(ExperimentTest, SweepOrderingAndDivergedCells) {
  const auto cfg = write("sweep.cfg",
                         "problem = quadratic\nmethod = gd\n"
                         "eta = 3, 0.5\nT = 200\nx0 = 1\nseeds = 2, 1\n");
  ASSERT_EQ(exec(Mode::kSweep, cfg, dir_ / "s.csv", 2), kExitOk);
  const auto rows = lines(slurp(dir_ / "s.csv"));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[1].rfind("inf,0.5,1,inf,ok,", 0), 0u) << rows[1];
  EXPECT_EQ(rows[2].rfind("inf,0.5,2,inf,ok,", 0), 0u) << rows[2];
  EXPECT_EQ(rows[3].rfind("inf,3,1,inf,diverged,", 0), 0u) << rows[3];
}

TEST_F(ExperimentTest, SweepThreadsDoNotChangeOutput) {
  const auto cfg = write("sweep.cfg",
                         "problem = chi_square\nmethod = clipped_sgd\n"
                         "c = 0.1, 1, 10\neta = 0.01, 0.1\nT = 300\n"
                         "seeds = 1,2,3\ntarget_grad_norm = 5\n");
  ASSERT_EQ(exec(Mode::kSweep, cfg, dir_ / "a.csv", 1), kExitOk);
  ASSERT_EQ(exec(Mode::kSweep, cfg, dir_ / "b.csv", 4), kExitOk);
  EXPECT_EQ(slurp(dir_ / "a.csv"), slurp(dir_ / "b.csv"));
}

TEST_F(ExperimentTest, FixedPointRows) {
  const auto cfg =
      write("fp.cfg", "mode = fixedpoint\nsigma = 1, 0\nc = 2, 4\n");
  ASSERT_EQ(exec(Mode::kFixedPoint, cfg, dir_ / "fp.csv"), kExitOk);
  const auto rows = lines(slurp(dir_ / "fp.csv"));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[1], "0,2,n_a,,,,,,,skipped");
  EXPECT_EQ(rows[2], "0,4,n_a,,,,,,,skipped");
  EXPECT_NE(rows[3].find("small_c"), std::string::npos);
  EXPECT_NE(rows[3].find(",0.1243556529821"), std::string::npos);
  EXPECT_NE(rows[3].find("pass"), std::string::npos);
  EXPECT_NE(rows[4].find("large_c"), std::string::npos);
  EXPECT_NE(rows[4].find(",0.041666666666666664,pass"), std::string::npos);
}

TEST_F(ExperimentTest, CertifyQuadratic) {
  const auto good =
      write("good.cfg", "problem = quadratic\ndim = 3\nL = 2\nn_pairs = 500\n");
  EXPECT_EQ(exec(Mode::kCertify, good, dir_ / "g.txt"), kExitOk);
  const auto bad = write("bad.cfg",
                         "problem = quadratic\ndim = 3\nL = 2\ncert_L0 = 1\n"
                         "n_pairs = 100\n");
  EXPECT_EQ(exec(Mode::kCertify, bad, dir_ / "b.txt"), kExitCheckFailed);
  EXPECT_NE(slurp(dir_ / "b.txt").find("violation gradient_lipschitz"),
            std::string::npos);
}

TEST_F(ExperimentTest, CertifyLogisticAndBernoulli) {
  const auto lr = write("lr.cfg",
                        "problem = logistic\ndataset = synthetic\n"
                        "subsample = 500\nsubsample_seed = 1\n"
                        "n_pairs = 1000\nfd_points = 3\n");
  EXPECT_EQ(exec(Mode::kCertify, lr, dir_ / "l.txt"), kExitOk) << last_err_;
  const auto b = write("b.cfg",
                       "problem = bernoulli_shift\nconstruction = large_c\n"
                       "construction_c = 4\nc = 4, 8\n");
  EXPECT_EQ(exec(Mode::kCertify, b, dir_ / "b.txt"), kExitOk) << last_err_;
  EXPECT_NE(slurp(dir_ / "b.txt").find("clip_probability c 8"),
            std::string::npos);
}

TEST_F(ExperimentTest, LibsvmDatasetPath) {
  const auto data = write("tiny.svm", "+1 1:1 2:0.5\n-1 2:1\n-1 1:0.3\n");
  const auto cfg = write("lr.cfg", "problem = logistic\ndataset = " +
                                       data.string() +
                                       "\nmethod = gd\neta = 1\nT = 5\n");
  ASSERT_EQ(exec(Mode::kRun, cfg, dir_ / "o.csv"), kExitOk) << last_err_;
  EXPECT_EQ(lines(slurp(dir_ / "o.csv")).size(), 7u);
  const auto broken = write("broken.svm", "+1 2:1 1:1\n");
  const auto cfg2 = write("lr2.cfg", "problem = logistic\ndataset = " +
                                         broken.string() + "\nmethod = gd\n");
  EXPECT_EQ(exec(Mode::kRun, cfg2, dir_ / "o.csv"), kExitData);
}

TEST_F(ExperimentTest, BoundConvexPassesEveryT) {
  const auto cfg = write("b.cfg",
                         "problem = quadratic\ncurvature = 0.5, 2\n"
                         "center = 1, 1\nmethod = clipped_gd\n"
                         "c = 0.01, 0.1, 1\neta = 0.25\nT = 2000\nx0 = 5, -3\n"
                         "theorem = det_convex\n");
  ASSERT_EQ(exec(Mode::kBound, cfg, dir_ / "b.txt"), kExitOk) << last_err_;
  const std::string report = slurp(dir_ / "b.txt");
  EXPECT_NE(report.find("summary pass 3 fail 0"), std::string::npos) << report;
}

TEST_F(ExperimentTest, BoundVacuousWhenStepTooLarge) {
  const auto cfg = write("b.cfg",
                         "problem = quadratic\nmethod = clipped_gd\nc = 1\n"
                         "eta = 0.9\nT = 100\nx0 = 2\ntheorem = det_convex\n");
  ASSERT_EQ(exec(Mode::kBound, cfg, dir_ / "b.txt"), kExitOk) << last_err_;
  EXPECT_NE(slurp(dir_ / "b.txt").find("vacuous 1"), std::string::npos);
}

TEST_F(ExperimentTest, BoundStochasticMeanOverSeeds) {
  const auto cfg = write("b.cfg",
                         "problem = bernoulli_shift\nconstruction = large_c\n"
                         "construction_c = 4\nmethod = clipped_sgd\nc = 4\n"
                         "eta = 0.01, 0.1\nT = 2000\nx0 = 5\n"
                         "seeds = 1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,"
                         "19,20\ntheorem = stoch_nonconvex\n");
  ASSERT_EQ(exec(Mode::kBound, cfg, dir_ / "b.txt", 2), kExitOk) << last_err_;
  EXPECT_NE(slurp(dir_ / "b.txt").find("summary pass 2 fail 0"),
            std::string::npos)
      << slurp(dir_ / "b.txt");
}

TEST_F(ExperimentTest, BoundFromTraceFile) {
  const auto run_cfg = write("r.cfg",
                             "problem = quadratic\nmethod = clipped_gd\n"
                             "c = 0.5\neta = 0.5\nT = 100\nx0 = 3\n");
  ASSERT_EQ(exec(Mode::kRun, run_cfg, dir_ / "t.csv"), kExitOk);
  const auto cfg = write("b.cfg", "problem = quadratic\nc = 0.5\neta = 0.5\n"
                                  "x0 = 3\ntheorem = det_convex\ntrace = " +
                                      (dir_ / "t.csv").string() + "\n");
  ASSERT_EQ(exec(Mode::kBound, cfg, dir_ / "b.txt"), kExitOk) << last_err_;
  EXPECT_NE(slurp(dir_ / "b.txt").find(" pass\n"), std::string::npos);
}

}  // namespace
}  // namespace clipsgd
