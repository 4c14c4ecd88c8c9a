#include "mulsim/modulation.hpp"

#include <cmath>

#include "mulsim/error.hpp"
#include "mulsim/rng.hpp"

namespace mulsim::phy {
namespace {

const double kQpskAmp = 1.0 / std::sqrt(2.0);
const double kPam8Step = 1.0 / std::sqrt(42.0);  // unit mean symbol energy

// 3 Gray bits -> PAM8 level index 0..7 (level value (2l-7)*step).
inline int pam8_level(std::uint32_t gray) {
  return static_cast<int>(gray ^ (gray >> 1) ^ (gray >> 2));
}

inline std::uint32_t pam8_gray(int level) {
  const auto l = static_cast<std::uint32_t>(level);
  return l ^ (l >> 1);
}

inline double pam8_value(int level) { return (2.0 * level - 7.0) * kPam8Step; }

inline int pam8_slice(double x) {
  const int l = static_cast<int>(std::lround((x / kPam8Step + 7.0) / 2.0));
  return l < 0 ? 0 : (l > 7 ? 7 : l);
}

inline int payload_bit_or_pad(const BitPayload& p, std::size_t i) {
  return i < p.size_bits() ? p.bit(i) : 0;
}

}  // namespace

const char* modulation_name(Modulation m) {
  return m == Modulation::kQpsk ? "qpsk" : "qam64";
}

std::vector<Symbol> modulate(const BitPayload& p, Modulation m) {
  const int bps = bits_per_symbol(m);
  const std::size_t n_sym = (p.size_bits() + static_cast<std::size_t>(bps) - 1) /
                            static_cast<std::size_t>(bps);
  std::vector<Symbol> out(n_sym);
  for (std::size_t s = 0; s < n_sym; ++s) {
    const std::size_t base = s * static_cast<std::size_t>(bps);
    if (m == Modulation::kQpsk) {
      out[s].i = payload_bit_or_pad(p, base) ? -kQpskAmp : kQpskAmp;
      out[s].q = payload_bit_or_pad(p, base + 1) ? -kQpskAmp : kQpskAmp;
    } else {
      std::uint32_t gi = 0, gq = 0;
      for (int b = 0; b < 3; ++b) {
        gi = (gi << 1) | static_cast<std::uint32_t>(payload_bit_or_pad(p, base + b));
        gq = (gq << 1) | static_cast<std::uint32_t>(payload_bit_or_pad(p, base + 3 + b));
      }
      out[s].i = pam8_value(pam8_level(gi));
      out[s].q = pam8_value(pam8_level(gq));
    }
  }
  return out;
}

BitPayload demodulate(const std::vector<Symbol>& symbols, Modulation m,
                      PayloadKind kind, std::size_t nbits) {
  const int bps = bits_per_symbol(m);
  if (symbols.size() * static_cast<std::size_t>(bps) < nbits)
    throw CodecError("demodulate: too few symbols for the requested bit count");
  BitPayload p(kind);
  std::size_t produced = 0;
  for (const Symbol& s : symbols) {
    if (produced >= nbits) break;
    std::uint32_t word = 0;
    if (m == Modulation::kQpsk) {
      word = (static_cast<std::uint32_t>(s.i < 0.0) << 1) |
             static_cast<std::uint32_t>(s.q < 0.0);
    } else {
      word = (pam8_gray(pam8_slice(s.i)) << 3) | pam8_gray(pam8_slice(s.q));
    }
    for (int b = bps - 1; b >= 0 && produced < nbits; --b, ++produced)
      p.push_bit(static_cast<int>((word >> b) & 1u));
  }
  return p;
}

BitPayload transmit(const BitPayload& p, Modulation m, double snr_db,
                    std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0.0) return p;
  if (std::isnan(snr_db)) throw ConfigError("transmit: NaN SNR");
  std::vector<Symbol> symbols = modulate(p, m);
  const double n0 = std::pow(10.0, -snr_db / 10.0);  // Es is 1 by construction
  const double sigma = std::sqrt(n0 / 2.0);
  Rng rng(seed);
  for (Symbol& s : symbols) {
    s.i += sigma * rng.normal();
    s.q += sigma * rng.normal();
  }
  return demodulate(symbols, m, p.kind(), p.size_bits());
}

double airtime_s(std::size_t payload_bits, Modulation m, double rate_bps) {
  if (!(rate_bps > 0.0)) throw ConfigError("airtime_s: rate must be positive");
  const int bps = bits_per_symbol(m);
  const std::size_t n_sym = (payload_bits + static_cast<std::size_t>(bps) - 1) /
                            static_cast<std::size_t>(bps);
  return static_cast<double>(n_sym) * static_cast<double>(bps) / rate_bps;
}

double qfunc(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double qpsk_ber_at_ebn0_db(double ebn0_db) {
  const double ebn0 = std::pow(10.0, ebn0_db / 10.0);
  return qfunc(std::sqrt(2.0 * ebn0));
}

double qam64_ber_approx_at_esn0_db(double esn0_db) {
  const double esn0 = std::pow(10.0, esn0_db / 10.0);
  return (7.0 / 12.0) * qfunc(std::sqrt(esn0 / 21.0));
}

}  // namespace mulsim::phy
