#include "semcom/channel.hpp"

#include <cmath>
#include <numbers>

#include "semcom/common.hpp"
#include "semcom/rng.hpp"

namespace semcom {

double ComplexSignal::mean_power() const {
  if (symbols.empty()) return 0.0;
  double s = 0.0;
  for (const auto& z : symbols) s += std::norm(z);
  return s / static_cast<double>(symbols.size());
}

bool ComplexSignal::all_finite() const {
  for (const auto& z : symbols) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

ComplexSignal power_normalize(const ComplexSignal& x) {
  if (x.symbols.empty()) throw Error("power_normalize: empty signal");
  const double p = x.mean_power();
  if (p == 0.0) throw Error("power_normalize: degenerate signal (all symbols zero)");
  const double scale = 1.0 / std::sqrt(p);
  ComplexSignal out;
  out.symbols.reserve(x.size());
  for (const auto& z : x.symbols) out.symbols.push_back(z * scale);
  return out;
}

ComplexSignal real_to_complex(std::span<const double> v) {
  if (v.size() % 2 != 0) {
    throw Error("real_to_complex: odd length " + std::to_string(v.size()));
  }
  ComplexSignal s;
  s.symbols.reserve(v.size() / 2);
  for (std::size_t i = 0; i < v.size(); i += 2) s.symbols.emplace_back(v[i], v[i + 1]);
  return s;
}

std::vector<double> complex_to_real(const ComplexSignal& s) {
  std::vector<double> v;
  v.reserve(s.size() * 2);
  for (const auto& z : s.symbols) {
    v.push_back(z.real());
    v.push_back(z.imag());
  }
  return v;
}

double sigma_sq_from_snr(double snr_db) {
  if (!std::isfinite(snr_db)) throw Error("sigma_sq_from_snr: non-finite snr_db");
  return std::pow(10.0, -snr_db / 10.0);
}

double snr_from_sigma_sq(double sigma_sq) {
  if (!(sigma_sq > 0.0)) {
    throw Error("snr_from_sigma_sq: noise power must be positive, got " +
                std::to_string(sigma_sq));
  }
  return -10.0 * std::log10(sigma_sq);
}

ChannelRealization sample_channel(std::size_t symbol_count, const ChannelConfig& cfg) {
  if (symbol_count == 0) throw Error("transmit: empty signal");
  if (!cfg.noiseless && !std::isfinite(cfg.snr_db)) {
    throw Error("transmit: snr_db must be finite (use the noiseless flag for sigma^2 = 0)");
  }

  ChannelRealization r;
  Rng rng(cfg.seed);
  const bool fading = cfg.mode == FadingMode::rayleigh_block;
  if (fading) {
    // h ~ CN(0,1): E[|h|^2] = 1
    r.h = {rng.gaussian() * std::numbers::sqrt2 / 2.0,
           rng.gaussian() * std::numbers::sqrt2 / 2.0};
  }
  const bool equalized = fading && cfg.equalize;
  const std::complex<double> h_eff = equalized ? std::complex<double>{1.0, 0.0}
                                    : fading   ? r.h
                                               : std::complex<double>{1.0, 0.0};
  r.h_re = h_eff.real();
  r.h_im = h_eff.imag();

  r.noise_reals.assign(symbol_count * 2, 0.0);
  if (cfg.noiseless) {
    r.sigma_sq = 0.0;
    return r;
  }
  r.sigma_sq = sigma_sq_from_snr(cfg.snr_db);
  const double comp_std = std::sqrt(r.sigma_sq / 2.0);
  for (std::size_t i = 0; i < symbol_count; ++i) {
    std::complex<double> n{comp_std * rng.gaussian(), comp_std * rng.gaussian()};
    if (equalized) n /= r.h;  // (h x + n)/h = x + n/h
    r.noise_reals[i * 2] = n.real();
    r.noise_reals[i * 2 + 1] = n.imag();
  }
  return r;
}

TransmitTrace transmit_traced(const ComplexSignal& x, const ChannelConfig& cfg) {
  const ChannelRealization r = sample_channel(x.size(), cfg);
  TransmitTrace tr;
  tr.h = r.h;
  tr.sigma_sq = r.sigma_sq;
  if (cfg.noiseless && r.h_re == 1.0 && r.h_im == 0.0) {
    tr.y = x;  // bitwise identity in noiseless awgn / equalized fading
    return tr;
  }
  const std::complex<double> h_eff{r.h_re, r.h_im};
  tr.y.symbols.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    tr.y.symbols.push_back(h_eff * x.symbols[i] +
                           std::complex<double>{r.noise_reals[i * 2], r.noise_reals[i * 2 + 1]});
  }
  return tr;
}

ComplexSignal transmit(const ComplexSignal& x, const ChannelConfig& cfg) {
  return transmit_traced(x, cfg).y;
}

std::string to_string(FadingMode m) {
  return m == FadingMode::awgn ? "awgn" : "rayleigh_block";
}

FadingMode fading_mode_from_string(const std::string& s) {
  if (s == "awgn") return FadingMode::awgn;
  if (s == "rayleigh_block") return FadingMode::rayleigh_block;
  throw ConfigError("unknown channel mode '" + s + "' (expected awgn or rayleigh_block)");
}

}  // namespace semcom
