#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace semcom {

// Sequence of complex channel symbols (the transmitted x and received y).
struct ComplexSignal {
  std::vector<std::complex<double>> symbols;

  std::size_t size() const { return symbols.size(); }
  double mean_power() const;
  bool all_finite() const;
  bool operator==(const ComplexSignal&) const = default;
};

enum class FadingMode { awgn, rayleigh_block };

struct ChannelConfig {
  double snr_db = 10.0;
  bool noiseless = false;  // explicit infinite-SNR sentinel
  FadingMode mode = FadingMode::awgn;
  std::uint64_t seed = 0;
  bool equalize = false;  // perfect receiver CSI: divide y by h
};

// Scales uniformly so that mean |symbol|^2 == 1. Throws on an all-zero signal.
ComplexSignal power_normalize(const ComplexSignal& x);

// Pairs consecutive reals as (re, im). Throws on odd length.
ComplexSignal real_to_complex(std::span<const double> v);
std::vector<double> complex_to_real(const ComplexSignal& s);

// noise power for unit signal power
double sigma_sq_from_snr(double snr_db);
double snr_from_sigma_sq(double sigma_sq);

// One channel use: h and the noise vector actually applied, plus y.
struct TransmitTrace {
  ComplexSignal y;
  std::complex<double> h{1.0, 0.0};
  double sigma_sq = 0.0;
};

// y = h x + n, n ~ CN(0, sigma^2 I). awgn fixes h = 1; rayleigh_block draws
// one h ~ CN(0,1) per call. With equalize set, fading output is y / h.
// Identical (x, cfg) including seed give bitwise-identical results.
ComplexSignal transmit(const ComplexSignal& x, const ChannelConfig& cfg);
TransmitTrace transmit_traced(const ComplexSignal& x, const ChannelConfig& cfg);

// One drawn channel realization reduced to an affine map on the real pair
// layout: y = h_eff * x + n_eff. Equalization folds 1/h into both terms, so
// the training path and transmit() see the exact same randomness.
struct ChannelRealization {
  double h_re = 1.0, h_im = 0.0;          // effective coefficient
  std::vector<double> noise_reals;        // effective noise, interleaved re/im
  std::complex<double> h{1.0, 0.0};       // raw coefficient as drawn
  double sigma_sq = 0.0;
};
ChannelRealization sample_channel(std::size_t symbol_count, const ChannelConfig& cfg);

std::string to_string(FadingMode m);
FadingMode fading_mode_from_string(const std::string& s);

}  // namespace semcom
