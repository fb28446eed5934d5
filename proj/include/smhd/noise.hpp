#pragma once

// Brownian increments and the multiplicative noise families.
//
// Increments come from a counter-based generator (Philox4x32-10 with the
// 64-bit seed as key), so any entry can be regenerated from
// (seed, channel, mode, step) without replaying a stream. Storage order is
// [channel][mode][step]; channel 0 drives the momentum equation (β¹),
// channel 1 the induction equation (β²).

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "smhd/basis.hpp"
#include "smhd/galerkin.hpp"

namespace smhd {

/// Philox4x32 with 10 rounds.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Two independent standard normals for the given counter (Box–Muller).
std::array<double, 2> philox_normal_pair(std::uint64_t seed, std::uint32_t channel,
                                         std::uint32_t mode, std::uint64_t pair_index);

class BrownianPaths {
 public:
  BrownianPaths() = default;
  BrownianPaths(std::uint64_t seed, int K, double dt, long steps);

  std::uint64_t seed() const { return seed_; }
  int K() const { return K_; }
  double dt() const { return dt_; }
  long steps() const { return steps_; }

  /// Increment of β^{channel+1}_{mode+1} over [step·dt, (step+1)·dt].
  double increment(int channel, int mode, long step) const {
    return data_[(static_cast<std::size_t>(channel) * K_ + mode) * steps_ + step];
  }
  double& increment(int channel, int mode, long step) {
    return data_[(static_cast<std::size_t>(channel) * K_ + mode) * steps_ + step];
  }
  const std::vector<double>& data() const { return data_; }

  /// Increments over steps of length factor·dt (sums of consecutive increments).
  BrownianPaths coarsen(int factor) const;

  /// Raw little-endian float64 array in [channel][mode][step] order.
  void write_binary(const std::string& path) const;
  static BrownianPaths read_binary(const std::string& path, std::uint64_t seed, int K, double dt,
                                   long steps);

 private:
  std::uint64_t seed_ = 0;
  int K_ = 0;
  double dt_ = 0.0;
  long steps_ = 0;
  std::vector<double> data_;
};

BrownianPaths sample_brownian(std::uint64_t seed, int K, double T, double dt);

struct NoiseConfig {
  int K = 8;
  /// a_k = amplitude · k^{-decay}.
  double amplitude = 0.5;
  double decay = 1.5;
  /// Multiplier of the momentum-linear part f_{k,2}.
  double f2_scale = 1.0;
  /// Multiplier of the magnetic shapes.
  double g_scale = 1.0;
};

/// Concrete families
///   f_k(ρ, m, x) = a_k [ρ^{(γ+1)/2} s_k(x) + f2_scale c_k(x) m],
///   g_k(B, x)    = a_k g_scale c_k(x) B,
/// with s_k a unit-sup Dirichlet sine mode along one axis direction and c_k a
/// unit-sup Neumann cosine mode.
class NoiseModel {
 public:
  NoiseModel(const Domain& domain, const NoiseConfig& cfg, double gamma);

  int K() const { return cfg_.K; }
  const NoiseConfig& config() const { return cfg_; }
  double gamma() const { return gamma_; }
  double a(int k) const { return amps_[k]; }
  const std::vector<double>& amplitudes() const { return amps_; }
  /// Vector shape s_k at cell centers.
  const GridVector& f1_profile(int k) const { return f1_[k]; }
  /// Scalar f_{k,2} (includes f2_scale, excludes a_k).
  const GridField& f2_profile(int k) const { return f2_[k]; }
  /// Scalar g shape (includes g_scale, excludes a_k).
  const GridField& g_profile(int k) const { return g_[k]; }
  /// True when every amplitude vanishes.
  bool silent() const;

  /// Σ_{k>K} a_k².
  double hs_tail() const;

 private:
  Domain domain_;
  NoiseConfig cfg_;
  double gamma_;
  std::vector<double> amps_;
  std::vector<GridVector> f1_;
  std::vector<GridField> f2_;
  std::vector<GridField> g_;
};

/// f_k at cell centers for every k; m is the momentum ρu.
std::vector<GridVector> eval_f(const GridField& rho, const GridVector& m, const NoiseModel& model);
std::vector<GridVector> eval_g(const GridVector& B, const NoiseModel& model);

/// ℙ(f_k/√ρ) for every k (the coefficients whose M^{1/2} image is f_k^n).
std::vector<CoeffVec> normalized_noise(const GridField& rho, const std::vector<GridVector>& f,
                                       const Basis& basis);
/// f_k^n = M^{1/2}[ρ] ℙ(f_k/√ρ).
std::vector<CoeffVec> projected_noise(const GridField& rho, const std::vector<GridVector>& f,
                                      const MassOp& massop, const Basis& basis);
/// ℙg_k.
std::vector<CoeffVec> projected_g(const std::vector<GridVector>& g, const Basis& basis);

struct GrowthSample {
  GridField rho;
  GridVector m;
  GridVector B;
};

struct GrowthReport {
  /// max_x Σ|f_{k,1}|² / ρ^{γ+1}
  double C_f1 = 0.0;
  /// max_x Σ|∂_ρ f_{k,1}|² / ρ^{γ-1}
  double C_df1 = 0.0;
  /// max_x Σ|f_{k,2}|² (with the amplitudes)
  double C_f2 = 0.0;
  /// max_x Σ|g_k|² / |B|²
  double C_g = 0.0;
  /// max_x Σ|∂_B g_k| (operator norms)
  double C_dg = 0.0;
  /// Σ a_k² sup|s_k|² and Σ a_k² sup|c_k|² style profile bounds.
  double bound_f1 = 0.0;
  double bound_f2 = 0.0;
  double bound_g = 0.0;
  /// Largest relative spread of each constant between the two halves of the sweep.
  double spread = 0.0;
  double hs_tail = 0.0;
  bool pass = false;
};

GrowthReport validate_growth(const NoiseModel& model, const std::vector<GrowthSample>& samples);

}  // namespace smhd
