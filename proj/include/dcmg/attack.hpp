#pragma once

// False-data-injection signals added to the actuator channels.

#include <cstdint>
#include <vector>

namespace dcmg {

enum class AttackKind { None, Constant, Polynomial, Exponential };

struct ChannelAttack {
  AttackKind kind = AttackKind::None;
  double constant = 0.0;          // c
  double poly_offset = 0.0;       // p0
  double poly_slope = 0.0;        // p1 [1/s]
  double exp_scale = 0.0;         // s
  double exp_offset = 0.0;        // o
  double exp_gain = 0.0;          // g
  double exp_rate = 0.0;          // kappa [1/s]
  double start = 0.0;             // t_i [s]
  double noise_std = 0.0;         // sigma
};

struct AttackSpec {
  /// One entry per actuator channel: sources first, load duty last.
  std::vector<ChannelAttack> channels;
  std::uint64_t seed = 0;
  /// Polynomial argument is time since attack start unless this is set,
  /// in which case absolute simulation time is used.
  bool polynomial_absolute_time = false;
  /// Noise is held piecewise constant over intervals of this length [s].
  double noise_hold = 1e-4;

  void validate() const;

  static AttackSpec none(std::size_t n_channels);
  /// Constant bias on every channel from `start`.
  static AttackSpec constant(std::size_t n_channels, double bias, double start);
  /// 1 + 5 * slope_i * t ramps with channel slopes 0.2, 0.15, 0.1, ...
  static AttackSpec polynomial(std::size_t n_channels, double start);
  /// Three-channel heterogeneous exponential attack with Gaussian noise.
  static AttackSpec exponential(double sigma, std::uint64_t seed);
};

/// Noise-free part of channel i at time t.
double deterministic_attack(const ChannelAttack& ch, double t, bool polynomial_absolute_time);

/// Gaussian sample for channel i in noise-hold slot `slot`. Counter-based,
/// so any (seed, channel, slot) triple can be evaluated independently.
double noise_sample(std::uint64_t seed, std::size_t channel, std::uint64_t slot);

/// Gaussian component alone, held over noise_hold slots and gated by each
/// channel's start time.
std::vector<double> attack_noise(const AttackSpec& spec, double t);

/// delta(t) for every channel, including held noise. Zero before each
/// channel's start time.
std::vector<double> evaluate_attack(const AttackSpec& spec, double t);

struct EnvelopeReport {
  bool pass = true;
  double worst_ratio = 0.0;  // max ||delta|| / (gamma e^{kappa t})
  double worst_time = 0.0;
};

/// Samples the noise-free attack norm at n_samples points on [0, horizon]
/// and compares it to gamma * exp(kappa * t).
EnvelopeReport envelope_check(const AttackSpec& spec, double horizon, double gamma, double kappa,
                              std::size_t n_samples);

}  // namespace dcmg
