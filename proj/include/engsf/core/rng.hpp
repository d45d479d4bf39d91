#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace engsf {

// Counter-based random stream keyed by (seed, label). The n-th draw of a
// stream depends only on the seed, the label string, and n, so results do not
// change with call interleaving across streams: a stream per particle labelled
// e.g. "forecast/step=12/particle=7" gives the same particle trajectory
// whether the particles are advanced serially or in any other order. Word
// generation is the splitmix64 sequence started at a key hashed from
// (seed, label); uniforms are strictly inside (0,1) so log(u) is always
// finite; normals use Box-Muller with the second value cached.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view label);

  // Stream for a derived purpose: label becomes "<label>/<suffix>".
  RngStream sub(std::string_view suffix) const;

  std::uint64_t next_u64();
  double uniform();
  double normal();
  void fill_normal(std::span<double> out);

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }

 private:
  std::uint64_t seed_;
  std::string label_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace engsf
