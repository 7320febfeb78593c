#include "fvkit/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace fvkit {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : Rng(splitmix64(seed), true) {}

Rng::Rng(std::uint64_t key, bool) : key_(key) {
  std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                    0x5eedu};
  engine_.seed(seq);
}

Rng Rng::substream(std::uint64_t index) const {
  return Rng(splitmix64(key_ ^ splitmix64(index + 0x632be59bd9b4e019ULL)), true);
}

double Rng::uniform() { return std::generate_canonical<double, 53>(engine_); }

double Rng::exponential(double rate) {
  if (!(rate > 0)) throw std::invalid_argument("exponential rate must be positive");
  return -std::log1p(-uniform()) / rate;
}

double Rng::gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

double Rng::beta(double a, double b) {
  if (!(a > 0) || !(b > 0)) throw std::invalid_argument("beta parameters must be positive");
  if (a == 1.0) return -std::expm1(std::log1p(-uniform()) / b);  // 1 - U^{1/b}
  const double x = gamma(a);
  const double y = gamma(b);
  return x / (x + y);
}

std::size_t Rng::below(std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

void parallel_chunks(const Rng& master, std::size_t chunks, std::size_t workers,
                     const std::function<void(std::size_t, Rng&)>& body) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, chunks);
  auto run_one = [&](std::size_t chunk) {
    Rng stream = master.substream(chunk);
    body(chunk, stream);
  };
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_one(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < chunks; c = next++) {
        try {
          run_one(c);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace fvkit
