#pragma once

#include <array>
#include <cstddef>
#include <string_view>

namespace mdkin {

/// The four cell populations: normal muscle cells, damaged muscle cells,
/// macrophages and cytotoxic T lymphocytes.
enum class Population : std::size_t { N = 0, D = 1, M = 2, C = 3 };

inline constexpr std::array<Population, 4> kPopulations{Population::N, Population::D,
                                                        Population::M, Population::C};

constexpr std::size_t index(Population p) noexcept { return static_cast<std::size_t>(p); }

constexpr std::string_view name(Population p) noexcept {
  constexpr std::array<std::string_view, 4> names{"N", "D", "M", "C"};
  return names[index(p)];
}

/// A value of type T for each population. Total over the four labels.
template <class T>
struct PerPopulation {
  std::array<T, 4> values{};

  constexpr T& operator[](Population p) noexcept { return values[index(p)]; }
  constexpr const T& operator[](Population p) const noexcept { return values[index(p)]; }

  constexpr auto begin() noexcept { return values.begin(); }
  constexpr auto end() noexcept { return values.end(); }
  constexpr auto begin() const noexcept { return values.begin(); }
  constexpr auto end() const noexcept { return values.end(); }

  friend constexpr bool operator==(const PerPopulation&, const PerPopulation&) = default;
};

template <class T>
constexpr PerPopulation<T> make_per_population(T n, T d, T m, T c) {
  return PerPopulation<T>{{n, d, m, c}};
}

}  // namespace mdkin
