#pragma once

#include <array>
#include <cstdint>

namespace mckv {

/// Philox4x32-10 counter-based bijection (Salmon et al., SC'11). Stateless:
/// every output block is a pure function of (counter, key).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key);
};

/// What a stream is used for; mixed into the counter so that e.g. initial
/// sampling and Brownian increments of the same particle never share draws.
enum class StreamPurpose : std::uint32_t {
  kInitial = 1,
  kNoise = 2,
  kAssumptionSampler = 3,
  kSubsample = 4,
  kFixture = 5,
};

/// Random stream addressed by (seed, stream id, purpose). Block `index`
/// yields 128 random bits; indices must stay below 2^32.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream, StreamPurpose purpose);

  std::array<std::uint32_t, 4> block(std::uint64_t index) const;

  /// Two doubles uniform on the open interval (0, 1), 53 bits each.
  std::array<double, 2> uniforms(std::uint64_t index) const;

  /// Two independent standard normals (Box-Muller on uniforms(index)).
  std::array<double, 2> normals(std::uint64_t index) const;

 private:
  Philox4x32::Key key_;
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
  std::uint32_t purpose_;
};

}  // namespace mckv
