#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mulsim/fixedpoint.hpp"

namespace mulsim::phy {

enum class Modulation { kQpsk, kQam64 };

inline int bits_per_symbol(Modulation m) { return m == Modulation::kQpsk ? 2 : 6; }
const char* modulation_name(Modulation m);

// Bulk sensor payloads ride the dense constellation; everything else stays
// on QPSK.
inline Modulation modulation_for(PayloadKind k) {
  return (k == PayloadKind::kLatentData || k == PayloadKind::kRawData)
             ? Modulation::kQam64
             : Modulation::kQpsk;
}

struct Symbol {
  double i = 0.0;
  double q = 0.0;
};

// Gray-mapped symbols with unit average energy. The tail is zero-padded to a
// whole symbol.
std::vector<Symbol> modulate(const BitPayload& p, Modulation m);

// Hard-decision demap; pad bits beyond `nbits` are dropped.
BitPayload demodulate(const std::vector<Symbol>& symbols, Modulation m,
                      PayloadKind kind, std::size_t nbits);

// One modulate -> AWGN at Es/N0 `snr_db` -> demodulate pass. An infinite SNR
// bypasses the noise entirely and returns the payload bit-exact.
BitPayload transmit(const BitPayload& p, Modulation m, double snr_db,
                    std::uint64_t seed);

inline BitPayload transmit(const BitPayload& p, double snr_db, std::uint64_t seed) {
  return transmit(p, modulation_for(p.kind()), snr_db, seed);
}

// Seconds on air for a payload at `rate_bps` (channel bits per second),
// counting tail padding.
double airtime_s(std::size_t payload_bits, Modulation m, double rate_bps);

// Theory oracles.
double qfunc(double x);
double qpsk_ber_at_ebn0_db(double ebn0_db);
double qam64_ber_approx_at_esn0_db(double esn0_db);
inline double ebn0_db_from_esn0_db(double esn0_db, Modulation m) {
  return esn0_db - 10.0 * std::log10(static_cast<double>(bits_per_symbol(m)));
}

}  // namespace mulsim::phy
