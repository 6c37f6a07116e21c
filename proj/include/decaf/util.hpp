#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>

namespace decaf {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent per-task seeds.
[[nodiscard]] std::uint64_t mix64(std::uint64_t x);

/// Seed for sub-task `index` of stream `stream` under `master`.
/// Stable across platforms and independent of execution order.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                        std::uint64_t index);

/// Worker count: DECAF_THREADS if set and positive, else hardware concurrency.
[[nodiscard]] std::size_t thread_count();

/// Runs body(i) for i in [0, n). Bodies must write only to slot i of their output.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body);

/// Shortest decimal representation that round-trips to the same double.
[[nodiscard]] std::string format_double(double value);

/// Fixed-point rendering with `decimals` digits ("54.50").
[[nodiscard]] std::string format_fixed(double value, int decimals);

/// Fixed-point rendering with trailing zeros (and a bare '.') stripped ("7.14", "0", "50").
[[nodiscard]] std::string format_trimmed(double value, int decimals);

/// Parses a full string as a double; throws ConfigError on garbage.
[[nodiscard]] double parse_double(std::string_view text);

} // namespace decaf
