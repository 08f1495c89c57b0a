#include "braids/draws.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include <json.hpp>

namespace braids {

void McmcConfig::validate() const {
  if (n_draws < 2) throw std::invalid_argument("n_draws must be at least 2");
  if (n_burn < 0) throw std::invalid_argument("n_burn must be nonnegative");
  if (thin < 1) throw std::invalid_argument("thin must be at least 1");
}

PosteriorDraws::PosteriorDraws(Eigen::MatrixXd tau, Eigen::MatrixXd hyper, DrawsMeta meta)
    : tau_(std::move(tau)), hyper_(std::move(hyper)), meta_(std::move(meta)) {
  if (tau_.rows() < 2) throw std::invalid_argument("posterior draws need S >= 2");
  if (tau_.cols() < 1) throw std::invalid_argument("posterior draws need N >= 1");
  if (hyper_.rows() != tau_.rows() || hyper_.cols() != 2) {
    throw std::invalid_argument("hyperparameter draws must be S x 2");
  }
  if (!tau_.allFinite() || !hyper_.allFinite()) {
    throw std::invalid_argument("posterior draws contain non-finite entries");
  }
  ate_ = tau_.rowwise().mean();
}

PosteriorDraws PosteriorDraws::rescaled(double factor) const {
  Eigen::MatrixXd hyper = hyper_ * factor;
  return PosteriorDraws(tau_ * factor, std::move(hyper), meta_);
}

namespace {

constexpr std::array<char, 8> kMagic = {'B', 'R', 'D', 'R', 'A', 'W', 'S', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b.data()), 8);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), 8);
  if (!in) throw std::runtime_error("truncated draws file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t v = 0;
  std::memcpy(&v, &d, 8);
  put_u64(out, v);
}

double get_f64(std::istream& in) {
  const std::uint64_t v = get_u64(in);
  double d = 0.0;
  std::memcpy(&d, &v, 8);
  return d;
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

}  // namespace

void write_draws(const PosteriorDraws& draws, const std::filesystem::path& stem) {
  std::ofstream out(with_suffix(stem, ".bin"), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + with_suffix(stem, ".bin").string());
  out.write(kMagic.data(), kMagic.size());
  const auto s = static_cast<std::uint64_t>(draws.n_draws());
  const auto n = static_cast<std::uint64_t>(draws.n_units());
  put_u64(out, s);
  put_u64(out, n);
  for (std::uint64_t r = 0; r < s; ++r) {
    for (std::uint64_t i = 0; i < n; ++i) put_f64(out, draws.tau()(r, i));
  }
  for (std::uint64_t r = 0; r < s; ++r) {
    put_f64(out, draws.hyper()(r, 0));
    put_f64(out, draws.hyper()(r, 1));
  }

  nlohmann::json meta = {
      {"format", "braids-draws"},
      {"version", 1},
      {"model", draws.meta().model},
      {"n_draws", s},
      {"n_units", n},
      {"n_burn", draws.meta().n_burn},
      {"thin", draws.meta().thin},
      {"seed", draws.meta().seed},
      {"hyper_columns", {"sigma", "sigma_tau"}},
  };
  std::ofstream side(with_suffix(stem, ".json"));
  if (!side) throw std::runtime_error("cannot write " + with_suffix(stem, ".json").string());
  side << meta.dump(2) << "\n";
}

PosteriorDraws read_draws(const std::filesystem::path& path) {
  std::filesystem::path stem = path;
  if (stem.extension() == ".bin" || stem.extension() == ".json") stem.replace_extension();
  std::ifstream side(with_suffix(stem, ".json"));
  if (!side) throw std::runtime_error("cannot open " + with_suffix(stem, ".json").string());
  const auto meta_json = nlohmann::json::parse(side);
  std::ifstream in(with_suffix(stem, ".bin"), std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + with_suffix(stem, ".bin").string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("not a draws file");
  const auto s = get_u64(in);
  const auto n = get_u64(in);
  if (s != meta_json.at("n_draws").get<std::uint64_t>() || n != meta_json.at("n_units").get<std::uint64_t>()) {
    throw std::runtime_error("draws file and sidecar disagree on dimensions");
  }
  Eigen::MatrixXd tau(s, n);
  for (std::uint64_t r = 0; r < s; ++r) {
    for (std::uint64_t i = 0; i < n; ++i) tau(r, i) = get_f64(in);
  }
  Eigen::MatrixXd hyper(s, 2);
  for (std::uint64_t r = 0; r < s; ++r) {
    hyper(r, 0) = get_f64(in);
    hyper(r, 1) = get_f64(in);
  }
  DrawsMeta meta;
  meta.model = meta_json.at("model").get<std::string>();
  meta.n_burn = meta_json.at("n_burn").get<int>();
  meta.thin = meta_json.at("thin").get<int>();
  meta.seed = meta_json.at("seed").get<std::uint64_t>();
  return PosteriorDraws(std::move(tau), std::move(hyper), std::move(meta));
}

void write_draws_csv(const PosteriorDraws& draws, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  out << "draw,ate,sigma,sigma_tau";
  for (int i = 0; i < draws.n_units(); ++i) out << ",tau_" << (i + 1);
  out << "\n";
  for (int r = 0; r < draws.n_draws(); ++r) {
    out << r << ',' << draws.ate()[r] << ',' << draws.hyper()(r, 0) << ',' << draws.hyper()(r, 1);
    for (int i = 0; i < draws.n_units(); ++i) out << ',' << draws.tau()(r, i);
    out << "\n";
  }
}

}  // namespace braids
