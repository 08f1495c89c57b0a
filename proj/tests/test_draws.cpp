#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "braids/draws.hpp"
#include "helpers.hpp"

using namespace braids;
namespace fs = std::filesystem;

TEST_CASE("ate is the row mean and validation rejects bad shapes") {
  Eigen::MatrixXd tau(2, 3);
  tau << 1, 2, 3, 4, 5, 6;
  const PosteriorDraws d = testing::make_draws(tau);
  CHECK(d.ate()[0] == doctest::Approx(2.0));
  CHECK(d.ate()[1] == doctest::Approx(5.0));
  CHECK(d.posterior_mean()[2] == doctest::Approx(4.5));
  CHECK_THROWS(PosteriorDraws(Eigen::MatrixXd::Zero(1, 3), Eigen::MatrixXd::Ones(1, 2), {}));
  CHECK_THROWS(PosteriorDraws(tau, Eigen::MatrixXd::Ones(3, 2), {}));
  Eigen::MatrixXd bad = tau;
  bad(0, 0) = std::nan("");
  CHECK_THROWS(PosteriorDraws(bad, Eigen::MatrixXd::Ones(2, 2), {}));
}

TEST_CASE("rescaling multiplies effects and scales") {
  const PosteriorDraws d = testing::random_draws(5, 4, 1);
  const PosteriorDraws r = d.rescaled(2.0);
  CHECK((r.tau() - 2.0 * d.tau()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.ate() - 2.0 * d.ate()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("binary container round trips exactly") {
  const fs::path dir = fs::temp_directory_path() / "braids_test_draws";
  fs::create_directories(dir);
  const PosteriorDraws d = testing::random_draws(7, 5, 2);
  write_draws(d, dir / "d");
  const PosteriorDraws back = read_draws(dir / "d");
  CHECK(back.tau() == d.tau());
  CHECK(back.hyper() == d.hyper());
  CHECK(back.meta().model == "test");
  write_draws(d, dir / "e");
  std::ifstream a(dir / "d.bin", std::ios::binary), b(dir / "e.bin", std::ios::binary);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
  write_draws_csv(d, dir / "d.csv");
  std::ifstream csv(dir / "d.csv");
  int lines = 0;
  for (std::string line; std::getline(csv, line);) ++lines;
  CHECK(lines == 8);
  std::ofstream(dir / "bad.bin", std::ios::binary) << "garbage";
  std::ofstream(dir / "bad.json") << "{}";
  CHECK_THROWS(read_draws(dir / "bad"));
  fs::remove_all(dir);
}
