#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "mulsim/error.hpp"

namespace mulsim::phy {

// Q9.9 fixed point: 18-bit two's-complement words, 9 fractional bits.
inline constexpr int kWordBits = 18;
inline constexpr int kFracBits = 9;
inline constexpr std::int32_t kQMin = -(1 << 17);       // -131072
inline constexpr std::int32_t kQMax = (1 << 17) - 1;    // 131071
inline constexpr double kValueMin = -256.0;
inline constexpr double kValueMax = 131071.0 / 512.0;   // 256 - 2^-9
inline constexpr double kResolution = 1.0 / 512.0;

// Round-to-nearest with saturation. NaN is a codec error.
std::int32_t quantize(double v);
inline double dequantize(std::int32_t q) { return static_cast<double>(q) * kResolution; }

inline std::uint32_t word_from_quant(std::int32_t q) {
  return static_cast<std::uint32_t>(q) & 0x3ffffu;
}
inline std::int32_t quant_from_word(std::uint32_t w) {
  w &= 0x3ffffu;
  return (w & 0x20000u) ? static_cast<std::int32_t>(w) - (1 << 18)
                        : static_cast<std::int32_t>(w);
}

inline std::uint32_t encode(double v) { return word_from_quant(quantize(v)); }
inline double decode(std::uint32_t word) { return dequantize(quant_from_word(word)); }

enum class PayloadKind : std::uint8_t {
  kRawData = 0,
  kLatentData = 1,
  kSoftmax = 2,
  kConformalSet = 3,
  kResult = 4,
  kControl = 5,
};

const char* payload_kind_name(PayloadKind k);

// A typed bit string, packed MSB-first.
class BitPayload {
 public:
  BitPayload() = default;
  explicit BitPayload(PayloadKind kind) : kind_(kind) {}

  PayloadKind kind() const { return kind_; }
  std::size_t size_bits() const { return nbits_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  void push_bit(int b);
  int bit(std::size_t i) const;
  void flip_bit(std::size_t i);
  void push_word(std::uint32_t v, int nbits);       // MSB first
  std::uint32_t word(std::size_t pos, int nbits) const;

  bool operator==(const BitPayload& o) const {
    return kind_ == o.kind_ && nbits_ == o.nbits_ && bytes_ == o.bytes_;
  }

  // Dump format: kind (1 byte), bit length (4 bytes little-endian), packed
  // payload bits MSB-first.
  void dump(std::ostream& out) const;
  static BitPayload parse(std::istream& in);

 private:
  PayloadKind kind_ = PayloadKind::kControl;
  std::size_t nbits_ = 0;
  std::vector<std::uint8_t> bytes_;
};

// Row-major reals as consecutive Q9.9 words (18 bits each).
BitPayload pack_reals(PayloadKind kind, const double* values, std::size_t n);
std::vector<double> unpack_reals(const BitPayload& p);

// Class membership mask, one bit per class, class 0 first.
BitPayload pack_class_mask(const std::vector<int>& classes, int n_classes);
std::vector<int> unpack_class_mask(const BitPayload& p);

inline std::size_t real_payload_bits(std::size_t n_values) { return n_values * kWordBits; }

}  // namespace mulsim::phy
