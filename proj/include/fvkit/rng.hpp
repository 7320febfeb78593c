// Seeded random streams with deterministic substreams.
//
// Every Monte Carlo routine takes an Rng explicitly. Work that fans out splits
// into a fixed number of chunks, each driven by substream(chunk), so results
// depend only on the master seed and never on the worker count.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace fvkit {

std::uint64_t splitmix64(std::uint64_t x);

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent child stream; the same (parent key, index) always yields the
  /// same child.
  Rng substream(std::uint64_t index) const;

  /// 64-bit key identifying this stream, used to tag fresh locations.
  std::uint64_t key() const { return key_; }
  /// Strictly increasing per stream; (key, counter) pairs never repeat.
  std::uint64_t next_counter() { return counter_++; }

  double uniform();  ///< [0, 1)
  double exponential(double rate);
  double gamma(double shape);
  double beta(double a, double b);
  std::size_t below(std::size_t n);  ///< uniform in {0, ..., n-1}

  std::mt19937_64& engine() { return engine_; }

 private:
  Rng(std::uint64_t key, bool);
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 engine_;
};

/// Runs body(chunk, rng.substream(chunk)) for every chunk in [0, chunks),
/// spreading chunks across up to `workers` threads (0 means hardware
/// concurrency). Each chunk must write only to its own output slot.
void parallel_chunks(const Rng& master, std::size_t chunks, std::size_t workers,
                     const std::function<void(std::size_t, Rng&)>& body);

}  // namespace fvkit
