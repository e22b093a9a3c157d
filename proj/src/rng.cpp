#include "ovl/rng.hpp"

#include <cmath>

namespace ovl {
namespace {

constexpr uint32_t kMult0 = 0xD2511F53u;
constexpr uint32_t kMult1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

inline void round_once(std::array<uint32_t, 4>& c, uint32_t k0, uint32_t k1) {
  const uint64_t p0 = static_cast<uint64_t>(kMult0) * c[0];
  const uint64_t p1 = static_cast<uint64_t>(kMult1) * c[2];
  const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
  const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
  c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
}

// Two 32-bit words -> uniform double in (0, 1), 53-bit resolution.
inline double to_unit(uint32_t hi, uint32_t lo) {
  const uint64_t u = (static_cast<uint64_t>(hi) << 32) | lo;
  return static_cast<double>(u >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

}  // namespace

std::array<uint32_t, 4> philox4x32(const std::array<uint32_t, 2>& key,
                                   std::array<uint32_t, 4> ctr) {
  uint32_t k0 = key[0], k1 = key[1];
  for (int r = 0; r < 10; ++r) {
    round_once(ctr, k0, k1);
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return ctr;
}

Vec3 normal_triple(const RngLineage& lineage, uint64_t step_index) {
  const std::array<uint32_t, 2> key = {
      static_cast<uint32_t>(lineage.master_seed),
      static_cast<uint32_t>(lineage.master_seed >> 32)};
  // Counter layout: (step lo, step hi | sub-block flag in the top bit,
  // trajectory lo, trajectory hi). Two blocks per step give four uniforms.
  auto block = [&](uint32_t sub) {
    const std::array<uint32_t, 4> ctr = {
        static_cast<uint32_t>(step_index),
        static_cast<uint32_t>((step_index >> 32) & 0x7FFFFFFFu) | (sub << 31),
        static_cast<uint32_t>(lineage.trajectory_index),
        static_cast<uint32_t>(lineage.trajectory_index >> 32)};
    return philox4x32(key, ctr);
  };
  const auto b0 = block(0);
  const auto b1 = block(1);
  const double u1 = to_unit(b0[0], b0[1]);
  const double u2 = to_unit(b0[2], b0[3]);
  const double u3 = to_unit(b1[0], b1[1]);
  const double u4 = to_unit(b1[2], b1[3]);
  const double r1 = std::sqrt(-2.0 * std::log(u1));
  const double r2 = std::sqrt(-2.0 * std::log(u3));
  const double a1 = 2.0 * M_PI * u2;
  const double a2 = 2.0 * M_PI * u4;
  return {r1 * std::cos(a1), r1 * std::sin(a1), r2 * std::cos(a2)};
}

Vec3 wiener_increment(const RngLineage& lineage, uint64_t step_index, double dt) {
  const double s = std::sqrt(dt);
  return s * normal_triple(lineage, step_index);
}

}
