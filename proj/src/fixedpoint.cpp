#include "mulsim/fixedpoint.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "mulsim/kernels.hpp"

namespace mulsim::phy {

std::int32_t quantize(double v) {
  if (std::isnan(v)) throw CodecError("quantize: NaN input");
  std::int32_t q = 0;
  kernels::active().quantize_q99(1, &v, &q);
  return q;
}

const char* payload_kind_name(PayloadKind k) {
  switch (k) {
    case PayloadKind::kRawData: return "raw_data";
    case PayloadKind::kLatentData: return "latent_data";
    case PayloadKind::kSoftmax: return "softmax";
    case PayloadKind::kConformalSet: return "conformal_set";
    case PayloadKind::kResult: return "result";
    case PayloadKind::kControl: return "control";
  }
  return "unknown";
}

void BitPayload::push_bit(int b) {
  const std::size_t byte = nbits_ / 8;
  if (byte == bytes_.size()) bytes_.push_back(0);
  if (b) bytes_[byte] |= static_cast<std::uint8_t>(0x80u >> (nbits_ % 8));
  ++nbits_;
}

int BitPayload::bit(std::size_t i) const {
  if (i >= nbits_) throw CodecError("payload bit index out of range");
  return (bytes_[i / 8] >> (7 - i % 8)) & 1;
}

void BitPayload::flip_bit(std::size_t i) {
  if (i >= nbits_) throw CodecError("payload bit index out of range");
  bytes_[i / 8] ^= static_cast<std::uint8_t>(0x80u >> (i % 8));
}

void BitPayload::push_word(std::uint32_t v, int nbits) {
  for (int b = nbits - 1; b >= 0; --b) push_bit(static_cast<int>((v >> b) & 1u));
}

std::uint32_t BitPayload::word(std::size_t pos, int nbits) const {
  std::uint32_t v = 0;
  for (int b = 0; b < nbits; ++b) v = (v << 1) | static_cast<std::uint32_t>(bit(pos + b));
  return v;
}

void BitPayload::dump(std::ostream& out) const {
  const auto kind_byte = static_cast<char>(kind_);
  out.write(&kind_byte, 1);
  const auto n = static_cast<std::uint32_t>(nbits_);
  char len[4] = {static_cast<char>(n & 0xff), static_cast<char>((n >> 8) & 0xff),
                 static_cast<char>((n >> 16) & 0xff), static_cast<char>((n >> 24) & 0xff)};
  out.write(len, 4);
  out.write(reinterpret_cast<const char*>(bytes_.data()),
            static_cast<std::streamsize>(bytes_.size()));
  if (!out) throw CodecError("payload dump: write failed");
}

BitPayload BitPayload::parse(std::istream& in) {
  char kind_byte = 0;
  char len[4];
  in.read(&kind_byte, 1);
  in.read(len, 4);
  if (!in) throw CodecError("payload parse: truncated header");
  const auto kb = static_cast<std::uint8_t>(kind_byte);
  if (kb > static_cast<std::uint8_t>(PayloadKind::kControl))
    throw CodecError("payload parse: unknown kind byte");
  std::uint32_t n = 0;
  for (int i = 3; i >= 0; --i) n = (n << 8) | static_cast<std::uint8_t>(len[i]);
  BitPayload p(static_cast<PayloadKind>(kb));
  p.nbits_ = n;
  p.bytes_.resize((n + 7) / 8);
  in.read(reinterpret_cast<char*>(p.bytes_.data()),
          static_cast<std::streamsize>(p.bytes_.size()));
  if (!in) throw CodecError("payload parse: truncated body");
  return p;
}

BitPayload pack_reals(PayloadKind kind, const double* values, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (std::isnan(values[i])) throw CodecError("pack_reals: NaN input");
  std::vector<std::int32_t> q(n);
  if (n > 0) kernels::active().quantize_q99(n, values, q.data());
  BitPayload p(kind);
  for (std::size_t i = 0; i < n; ++i) p.push_word(word_from_quant(q[i]), kWordBits);
  return p;
}

std::vector<double> unpack_reals(const BitPayload& p) {
  if (p.size_bits() % kWordBits != 0)
    throw CodecError("unpack_reals: bit length is not a multiple of the word size");
  const std::size_t n = p.size_bits() / kWordBits;
  std::vector<std::int32_t> q(n);
  for (std::size_t i = 0; i < n; ++i)
    q[i] = quant_from_word(p.word(i * kWordBits, kWordBits));
  std::vector<double> out(n);
  if (n > 0) kernels::active().dequantize_q99(n, q.data(), out.data());
  return out;
}

BitPayload pack_class_mask(const std::vector<int>& classes, int n_classes) {
  if (n_classes <= 0) throw CodecError("pack_class_mask: n_classes must be positive");
  std::vector<int> mask(static_cast<std::size_t>(n_classes), 0);
  for (int k : classes) {
    if (k < 0 || k >= n_classes) throw CodecError("pack_class_mask: class out of range");
    mask[static_cast<std::size_t>(k)] = 1;
  }
  BitPayload p(PayloadKind::kConformalSet);
  for (int b : mask) p.push_bit(b);
  return p;
}

std::vector<int> unpack_class_mask(const BitPayload& p) {
  std::vector<int> classes;
  for (std::size_t i = 0; i < p.size_bits(); ++i)
    if (p.bit(i)) classes.push_back(static_cast<int>(i));
  return classes;
}

}  // namespace mulsim::phy
