#include "smhd/noise.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "smhd/error.hpp"

namespace smhd {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

// Uniform in (0, 1) with 53 random bits.
inline double to_unit(std::uint32_t a, std::uint32_t b) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(a >> 5) << 26) | (b >> 6);
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

// Multi-indices sorted by Σk², ties lexicographic; entries start at `first`.
std::vector<std::array<int, 3>> sorted_modes(int dim, int first, std::size_t count) {
  std::vector<std::array<int, 3>> all;
  int span = 1;
  while (true) {
    all.clear();
    std::array<int, 3> k{first, first, first};
    const int hi = first + span;
    for (k[0] = first; k[0] < hi; ++k[0])
      for (k[1] = first; k[1] < hi; ++k[1])
        for (k[2] = first; k[2] < (dim == 3 ? hi : first + 1); ++k[2]) {
          std::array<int, 3> m = k;
          if (dim == 2) m[2] = 0;
          all.push_back(m);
        }
    if (all.size() >= 4 * count + 4) break;
    ++span;
  }
  auto norm2 = [dim](const std::array<int, 3>& m) {
    int s = 0;
    for (int a = 0; a < dim; ++a) s += m[a] * m[a];
    return s;
  };
  std::stable_sort(all.begin(), all.end(),
                   [&](const auto& x, const auto& y) { return norm2(x) < norm2(y); });
  all.resize(count);
  return all;
}

GridField separable_profile(const Domain& d, const std::array<int, 3>& m, bool sine) {
  GridField f = GridField::Ones(d.num_cells());
  long stride = 1;
  for (int a = d.dim - 1; a >= 0; --a) {
    const int g = d.grid_pts[a];
    for (long t = 0; t < f.size(); ++t) {
      const long i = (t / stride) % g;
      const double arg = m[a] * std::numbers::pi * (i + 0.5) / g;
      f[t] *= sine ? std::sin(arg) : std::cos(arg);
    }
    stride *= g;
  }
  return f;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kPhiloxW0;
      k[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

std::array<double, 2> philox_normal_pair(std::uint64_t seed, std::uint32_t channel,
                                         std::uint32_t mode, std::uint64_t pair_index) {
  const auto r = philox4x32({static_cast<std::uint32_t>(pair_index),
                             static_cast<std::uint32_t>(pair_index >> 32), mode, channel},
                            {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  const double u1 = to_unit(r[0], r[1]);
  const double u2 = to_unit(r[2], r[3]);
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  return {rad * std::cos(ang), rad * std::sin(ang)};
}

BrownianPaths::BrownianPaths(std::uint64_t seed, int K, double dt, long steps)
    : seed_(seed), K_(K), dt_(dt), steps_(steps) {
  if (K < 1) throw std::invalid_argument("BrownianPaths: K must be at least 1");
  if (!(dt > 0.0)) throw std::invalid_argument("BrownianPaths: dt must be positive");
  if (steps < 1) throw std::invalid_argument("BrownianPaths: need at least one step");
  data_.resize(2 * static_cast<std::size_t>(K) * steps);
  const double sd = std::sqrt(dt);
  for (int ch = 0; ch < 2; ++ch)
    for (int k = 0; k < K; ++k)
      for (long s = 0; s < steps; s += 2) {
        const auto z = philox_normal_pair(seed, ch, k, static_cast<std::uint64_t>(s / 2));
        increment(ch, k, s) = sd * z[0];
        if (s + 1 < steps) increment(ch, k, s + 1) = sd * z[1];
      }
}

BrownianPaths BrownianPaths::coarsen(int factor) const {
  if (factor < 1 || steps_ % factor != 0)
    throw std::invalid_argument("BrownianPaths::coarsen: factor must divide the step count");
  BrownianPaths c;
  c.seed_ = seed_;
  c.K_ = K_;
  c.dt_ = dt_ * factor;
  c.steps_ = steps_ / factor;
  c.data_.assign(2 * static_cast<std::size_t>(K_) * c.steps_, 0.0);
  for (int ch = 0; ch < 2; ++ch)
    for (int k = 0; k < K_; ++k)
      for (long s = 0; s < c.steps_; ++s) {
        double sum = 0.0;
        for (int j = 0; j < factor; ++j) sum += increment(ch, k, s * factor + j);
        c.increment(ch, k, s) = sum;
      }
  return c;
}

void BrownianPaths::write_binary(const std::string& path) const {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.write(reinterpret_cast<const char*>(data_.data()),
            static_cast<std::streamsize>(data_.size() * sizeof(double)));
}

BrownianPaths BrownianPaths::read_binary(const std::string& path, std::uint64_t seed, int K,
                                         double dt, long steps) {
  BrownianPaths p;
  p.seed_ = seed;
  p.K_ = K;
  p.dt_ = dt;
  p.steps_ = steps;
  p.data_.resize(2 * static_cast<std::size_t>(K) * steps);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  in.read(reinterpret_cast<char*>(p.data_.data()),
          static_cast<std::streamsize>(p.data_.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(p.data_.size() * sizeof(double)))
    throw std::runtime_error(path + ": truncated increment file");
  return p;
}

BrownianPaths sample_brownian(std::uint64_t seed, int K, double T, double dt) {
  if (!(dt > 0.0) || T < dt) throw std::invalid_argument("sample_brownian: need T >= dt > 0");
  const long steps = std::lround(T / dt);
  return BrownianPaths(seed, K, dt, steps);
}

NoiseModel::NoiseModel(const Domain& domain, const NoiseConfig& cfg, double gamma)
    : domain_(domain), cfg_(cfg), gamma_(gamma) {
  domain_.validate();
  if (cfg.K < 1) throw ConfigError("noise mode count K must be at least 1");
  if (!(cfg.decay > 0.5)) throw ConfigError("noise decay exponent must exceed 1/2");
  const int d = domain.dim;
  const int K = cfg.K;
  amps_.resize(K);
  for (int k = 0; k < K; ++k) amps_[k] = cfg.amplitude * std::pow(k + 1.0, -cfg.decay);

  const auto sines = sorted_modes(d, 1, static_cast<std::size_t>((K + d - 1) / d));
  const auto cosines = sorted_modes(d, 0, static_cast<std::size_t>(K));
  f1_.resize(K);
  f2_.resize(K);
  g_.resize(K);
  for (int k = 0; k < K; ++k) {
    const GridField s = separable_profile(domain, sines[k / d], true);
    f1_[k].assign(d, GridField::Zero(domain.num_cells()));
    f1_[k][k % d] = s;
    const GridField c = separable_profile(domain, cosines[k], false);
    f2_[k] = cfg.f2_scale * c;
    g_[k] = cfg.g_scale * c;
  }
}

bool NoiseModel::silent() const {
  return std::all_of(amps_.begin(), amps_.end(), [](double a) { return a == 0.0; });
}

double NoiseModel::hs_tail() const {
  const double two_p = 2.0 * cfg_.decay;
  double head = 0.0;
  for (int k = 1; k <= cfg_.K; ++k) head += std::pow(k, -two_p);
  return cfg_.amplitude * cfg_.amplitude * std::max(0.0, std::riemann_zeta(two_p) - head);
}

std::vector<GridVector> eval_f(const GridField& rho, const GridVector& m,
                               const NoiseModel& model) {
  if (rho.minCoeff() < 0.0) throw std::invalid_argument("eval_f: density must be nonnegative");
  const std::size_t d = m.size();
  const GridField pw = rho.array().pow(0.5 * (model.gamma() + 1.0)).matrix();
  std::vector<GridVector> out(model.K(), GridVector(d));
  for (int k = 0; k < model.K(); ++k) {
    const double a = model.a(k);
    for (std::size_t c = 0; c < d; ++c)
      out[k][c] = a * (pw.cwiseProduct(model.f1_profile(k)[c]) +
                       model.f2_profile(k).cwiseProduct(m[c]));
  }
  return out;
}

std::vector<GridVector> eval_g(const GridVector& B, const NoiseModel& model) {
  std::vector<GridVector> out(model.K(), GridVector(B.size()));
  for (int k = 0; k < model.K(); ++k)
    for (std::size_t c = 0; c < B.size(); ++c)
      out[k][c] = model.a(k) * model.g_profile(k).cwiseProduct(B[c]);
  return out;
}

std::vector<CoeffVec> normalized_noise(const GridField& rho, const std::vector<GridVector>& f,
                                       const Basis& basis) {
  if (!(rho.minCoeff() > 0.0))
    throw PositivityError("projected_noise: density must be strictly positive");
  const GridField inv_sqrt = rho.cwiseSqrt().cwiseInverse();
  std::vector<CoeffVec> out;
  out.reserve(f.size());
  for (const auto& fk : f) {
    GridVector scaled(fk.size());
    for (std::size_t c = 0; c < fk.size(); ++c) scaled[c] = fk[c].cwiseProduct(inv_sqrt);
    out.push_back(project(scaled, basis));
  }
  return out;
}

std::vector<CoeffVec> projected_noise(const GridField& rho, const std::vector<GridVector>& f,
                                      const MassOp& massop, const Basis& basis) {
  auto c = normalized_noise(rho, f, basis);
  for (auto& v : c) v = massop.apply_sqrt(v);
  return c;
}

std::vector<CoeffVec> projected_g(const std::vector<GridVector>& g, const Basis& basis) {
  std::vector<CoeffVec> out;
  out.reserve(g.size());
  for (const auto& gk : g) out.push_back(project(gk, basis));
  return out;
}

namespace {

struct Constants {
  double f1 = 0.0, df1 = 0.0, f2 = 0.0, g = 0.0, dg = 0.0;
};

Constants growth_constants(const NoiseModel& model, const std::vector<GrowthSample>& samples,
                           std::size_t first, std::size_t last) {
  Constants c;
  const int K = model.K();
  const double gm = model.gamma();
  for (std::size_t s = first; s < last; ++s) {
    const GrowthSample& smp = samples[s];
    const std::size_t d = smp.B.size();
    GridVector zero(d, GridField::Zero(smp.rho.size()));
    const auto f1 = eval_f(smp.rho, zero, model);
    const auto g = eval_g(smp.B, model);
    for (long x = 0; x < smp.rho.size(); ++x) {
      const double r = smp.rho[x];
      double s1 = 0.0, sd1 = 0.0, s2 = 0.0, sg = 0.0, sdg = 0.0, b2 = 0.0;
      for (std::size_t comp = 0; comp < d; ++comp) b2 += smp.B[comp][x] * smp.B[comp][x];
      for (int k = 0; k < K; ++k) {
        double shape2 = 0.0;
        for (std::size_t comp = 0; comp < d; ++comp) {
          s1 += f1[k][comp][x] * f1[k][comp][x];
          sg += g[k][comp][x] * g[k][comp][x];
          shape2 += model.f1_profile(k)[comp][x] * model.f1_profile(k)[comp][x];
        }
        const double dfk = model.a(k) * 0.5 * (gm + 1.0);
        sd1 += dfk * dfk * shape2 * std::pow(r, gm - 1.0);
        const double f2k = model.a(k) * model.f2_profile(k)[x];
        s2 += f2k * f2k;
        sdg += std::abs(model.a(k) * model.g_profile(k)[x]);
      }
      if (r > 0.0) {
        c.f1 = std::max(c.f1, s1 / std::pow(r, gm + 1.0));
        c.df1 = std::max(c.df1, sd1 / std::pow(r, gm - 1.0));
      }
      c.f2 = std::max(c.f2, s2);
      if (b2 > 0.0) c.g = std::max(c.g, sg / b2);
      c.dg = std::max(c.dg, sdg);
    }
  }
  return c;
}

double rel_spread(double x, double y) {
  const double m = std::max(std::abs(x), std::abs(y));
  return m > 0.0 ? std::abs(x - y) / m : 0.0;
}

}  // namespace

GrowthReport validate_growth(const NoiseModel& model, const std::vector<GrowthSample>& samples) {
  GrowthReport r;
  if (samples.empty()) return r;
  const Constants all = growth_constants(model, samples, 0, samples.size());
  r.C_f1 = all.f1;
  r.C_df1 = all.df1;
  r.C_f2 = all.f2;
  r.C_g = all.g;
  r.C_dg = all.dg;
  double sa2 = 0.0;
  for (double a : model.amplitudes()) sa2 += a * a;
  const NoiseConfig& cfg = model.config();
  r.bound_f1 = sa2;
  r.bound_f2 = sa2 * cfg.f2_scale * cfg.f2_scale;
  r.bound_g = sa2 * cfg.g_scale * cfg.g_scale;
  if (samples.size() >= 2) {
    const std::size_t half = samples.size() / 2;
    const Constants lo = growth_constants(model, samples, 0, half);
    const Constants hi = growth_constants(model, samples, half, samples.size());
    r.spread = std::max({rel_spread(lo.f1, hi.f1), rel_spread(lo.df1, hi.df1),
                         rel_spread(lo.f2, hi.f2), rel_spread(lo.g, hi.g),
                         rel_spread(lo.dg, hi.dg)});
  }
  r.hs_tail = model.hs_tail();
  const bool finite = std::isfinite(r.C_f1) && std::isfinite(r.C_df1) && std::isfinite(r.C_f2) &&
                      std::isfinite(r.C_g) && std::isfinite(r.C_dg);
  r.pass = finite && r.spread <= 0.1;
  return r;
}

}  // namespace smhd
