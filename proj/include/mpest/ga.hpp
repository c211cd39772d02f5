#pragma once

// Binary-chromosome genetic algorithm: fixed-point genes, roulette-wheel
// selection, n-point crossover, per-bit mutation and elitism.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "mpest/errors.hpp"

namespace mpest::ga {

using Rng = std::mt19937_64;
using Chromosome = std::vector<std::uint8_t>;

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

struct Gene {
  double lower = 0.0;
  double upper = 1.0;
  unsigned bits = 16;
};

struct GeneLayout {
  std::vector<Gene> genes;

  std::size_t total_bits() const {
    std::size_t n = 0;
    for (const Gene& g : genes) n += g.bits;
    return n;
  }

  void validate() const {
    if (genes.empty()) throw DomainError("GeneLayout: no genes");
    for (const Gene& g : genes) {
      if (g.bits < 1 || g.bits > 52) throw DomainError("GeneLayout: bits must lie in [1, 52]");
      if (!(g.lower < g.upper)) throw DomainError("GeneLayout: lower bound must be below upper");
    }
  }
};

struct MaxGenerations {
  std::size_t generations = 500;
};

/// Stop once the best-ever objective improved by less than epsilon over the
/// last `window` generations.
struct FitnessPlateau {
  std::size_t window = 50;
  double epsilon = 1e-12;
};

/// Stop when every chromosome in the population is identical.
struct UniformPopulation {};

using Termination = std::variant<MaxGenerations, FitnessPlateau, UniformPopulation>;

struct GaConfig {
  std::size_t population_size = 50;
  double crossover_prob = 0.6;
  double mutation_prob = 0.001;
  std::size_t elitism_count = 1;
  std::size_t crossover_points = 1;
  Termination termination = MaxGenerations{500};
  // Hard cap on evaluated generations, whichever rule is active.
  std::size_t max_generations_cap = 500;
  std::uint64_t seed = 0;

  void validate() const {
    if (population_size < 2) throw DomainError("GaConfig: population_size must be >= 2");
    if (!(crossover_prob >= 0.0 && crossover_prob <= 1.0))
      throw DomainError("GaConfig: crossover_prob must lie in [0, 1]");
    if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0))
      throw DomainError("GaConfig: mutation_prob must lie in [0, 1]");
    if (elitism_count >= population_size)
      throw DomainError("GaConfig: elitism_count must be below population_size");
    if (crossover_points < 1) throw DomainError("GaConfig: crossover_points must be >= 1");
    if (max_generations_cap < 1) throw DomainError("GaConfig: max_generations_cap must be >= 1");
    if (const auto* m = std::get_if<MaxGenerations>(&termination); m && m->generations < 1)
      throw DomainError("GaConfig: max_generations must be >= 1");
    if (const auto* p = std::get_if<FitnessPlateau>(&termination); p && p->window < 1)
      throw DomainError("GaConfig: plateau window must be >= 1");
  }
};

struct Individual {
  Chromosome chromosome;
  double objective_value = 0.0;
  double fitness = 0.0;
};

/// Default minimisation-to-fitness transform, in (0, 1] for nonnegative objectives.
inline double fitness_from_objective(double objective) { return 1.0 / (1.0 + objective); }

inline std::vector<double> decode(std::span<const std::uint8_t> chromosome,
                                  const GeneLayout& layout) {
  if (chromosome.size() != layout.total_bits())
    throw DomainError("decode: chromosome length " + std::to_string(chromosome.size()) +
                      " does not match layout length " + std::to_string(layout.total_bits()));
  std::vector<double> values;
  values.reserve(layout.genes.size());
  std::size_t pos = 0;
  for (const Gene& g : layout.genes) {
    std::uint64_t u = 0;
    for (unsigned b = 0; b < g.bits; ++b) u = (u << 1) | (chromosome[pos++] & 1u);
    const double levels = std::ldexp(1.0, static_cast<int>(g.bits)) - 1.0;
    if (u == 0) {
      values.push_back(g.lower);
    } else if (static_cast<double>(u) == levels) {
      values.push_back(g.upper);
    } else {
      values.push_back(g.lower + static_cast<double>(u) * (g.upper - g.lower) / levels);
    }
  }
  return values;
}

/// Inverse of decode up to quantization: nearest representable level per gene.
inline Chromosome encode(std::span<const double> values, const GeneLayout& layout) {
  if (values.size() != layout.genes.size()) throw DomainError("encode: value count mismatch");
  Chromosome out;
  out.reserve(layout.total_bits());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Gene& g = layout.genes[i];
    const double levels = std::ldexp(1.0, static_cast<int>(g.bits)) - 1.0;
    const double t = std::clamp((values[i] - g.lower) / (g.upper - g.lower), 0.0, 1.0);
    const auto u = static_cast<std::uint64_t>(std::llround(t * levels));
    for (unsigned b = g.bits; b-- > 0;) out.push_back(static_cast<std::uint8_t>((u >> b) & 1u));
  }
  return out;
}

inline std::string to_string(std::span<const std::uint8_t> chromosome) {
  std::string s;
  for (auto bit : chromosome) s.push_back(bit ? '1' : '0');
  return s;
}

inline Chromosome from_string(const std::string& bits) {
  Chromosome out;
  for (char c : bits) {
    if (c != '0' && c != '1') throw DomainError("from_string: expected only '0' and '1'");
    out.push_back(static_cast<std::uint8_t>(c == '1'));
  }
  return out;
}

/// Roulette-wheel draw: index i with probability fitness_i / sum of fitness.
/// When `exclude` is set that individual is removed from the wheel.
inline std::size_t select_parent(std::span<const Individual> population, Rng& rng,
                                 std::optional<std::size_t> exclude = std::nullopt) {
  double total = 0.0;
  for (std::size_t i = 0; i < population.size(); ++i) {
    const double f = population[i].fitness;
    if (!(f >= 0.0) || !std::isfinite(f)) throw DomainError("select_parent: invalid fitness");
    if (i != exclude) total += f;
  }
  if (!(total > 0.0)) throw DomainError("select_parent: all fitness values are zero");
  const double target = uniform01(rng) * total;
  double acc = 0.0;
  std::size_t last = population.size();
  for (std::size_t i = 0; i < population.size(); ++i) {
    if (i == exclude || population[i].fitness <= 0.0) continue;
    acc += population[i].fitness;
    last = i;
    if (target < acc) return i;
  }
  return last;  // rounding at the top of the wheel
}

/// Swap everything from `cut` onwards. Cut points are 1-based gaps: cut=4
/// keeps the first four bits of each parent.
inline std::pair<Chromosome, Chromosome> crossover_at(const Chromosome& p1, const Chromosome& p2,
                                                      std::size_t cut) {
  if (p1.size() != p2.size()) throw DomainError("crossover: parent lengths differ");
  if (cut > p1.size()) throw DomainError("crossover: cut point past end");
  Chromosome c1 = p1;
  Chromosome c2 = p2;
  std::swap_ranges(c1.begin() + static_cast<std::ptrdiff_t>(cut), c1.end(),
                   c2.begin() + static_cast<std::ptrdiff_t>(cut));
  return {std::move(c1), std::move(c2)};
}

/// With probability pc, n distinct cut points drawn from {1, ..., len-1}
/// and alternate segments swapped; otherwise copies of the parents.
inline std::pair<Chromosome, Chromosome> crossover_n_point(const Chromosome& p1,
                                                           const Chromosome& p2, double pc,
                                                           std::size_t points, Rng& rng) {
  if (p1.size() != p2.size()) throw DomainError("crossover: parent lengths differ");
  if (p1.size() < 2 || uniform01(rng) >= pc) return {p1, p2};
  const std::size_t gaps = p1.size() - 1;
  points = std::min(points, gaps);
  std::vector<std::size_t> cuts;
  while (cuts.size() < points) {
    const std::size_t c = 1 + uniform_index(rng, gaps);
    if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  Chromosome c1 = p1;
  Chromosome c2 = p2;
  for (std::size_t i = 0; i < cuts.size(); i += 2) {
    const std::size_t end = (i + 1 < cuts.size()) ? cuts[i + 1] : p1.size();
    std::swap_ranges(c1.begin() + static_cast<std::ptrdiff_t>(cuts[i]),
                     c1.begin() + static_cast<std::ptrdiff_t>(end),
                     c2.begin() + static_cast<std::ptrdiff_t>(cuts[i]));
  }
  return {std::move(c1), std::move(c2)};
}

inline std::pair<Chromosome, Chromosome> crossover_one_point(const Chromosome& p1,
                                                             const Chromosome& p2, double pc,
                                                             Rng& rng) {
  return crossover_n_point(p1, p2, pc, 1, rng);
}

inline void flip_bit(Chromosome& chromosome, std::size_t index) {
  if (index >= chromosome.size()) throw DomainError("flip_bit: index out of range");
  chromosome[index] ^= 1u;
}

/// Flip each bit independently with probability pm.
inline void mutate_bitflip(Chromosome& chromosome, double pm, Rng& rng) {
  if (pm <= 0.0) return;
  for (auto& bit : chromosome)
    if (pm >= 1.0 || uniform01(rng) < pm) bit ^= 1u;
}

struct GenerationStats {
  std::size_t generation = 0;
  double best = 0.0;       // best objective in this generation
  double mean = 0.0;       // mean objective in this generation
  double best_ever = 0.0;  // best objective seen up to and including this generation
};

struct GaResult {
  std::vector<double> best_params;
  Chromosome best_chromosome;
  double best_objective = std::numeric_limits<double>::infinity();
  std::vector<GenerationStats> history;

  std::size_t generations() const { return history.size(); }
};

namespace detail {

template <class Objective>
double evaluate(Objective& objective, const Chromosome& chromosome, const GeneLayout& layout) {
  const std::vector<double> params = decode(chromosome, layout);
  const double value = objective(std::span<const double>(params));
  if (!std::isfinite(value)) {
    std::string msg = "run_ga: objective returned a non-finite value at (";
    for (std::size_t i = 0; i < params.size(); ++i)
      msg += (i ? ", " : "") + std::to_string(params[i]);
    throw GaRunError(msg + ")", params);
  }
  return value;
}

inline bool all_identical(const std::vector<Individual>& pop) {
  return std::all_of(pop.begin(), pop.end(), [&](const Individual& ind) {
    return ind.chromosome == pop.front().chromosome;
  });
}

}  // namespace detail

/// No-op local search: run_ga without a memetic step.
struct NoLocalSearch {
  static constexpr bool enabled = false;
  std::vector<double> operator()(std::span<const double> x) const { return {x.begin(), x.end()}; }
};

/// Minimize `objective` (callable on std::span<const double>) over the layout box.
/// Returns the best individual ever evaluated. Deterministic for a fixed seed:
/// the RNG is only consumed in the serial breeding phase.
///
/// When `local` is supplied, every newly created individual is handed to it
/// and the improved point is written back into the chromosome (Lamarckian
/// step) before evaluation. Improved points are clamped to the box.
template <class Objective, class LocalSearch = NoLocalSearch>
GaResult run_ga(Objective&& objective, const GeneLayout& layout, const GaConfig& config,
                LocalSearch&& local = {}) {
  layout.validate();
  config.validate();
  Rng rng(config.seed);
  const std::size_t gamma = layout.total_bits();
  constexpr bool memetic = !std::is_same_v<std::decay_t<LocalSearch>, NoLocalSearch>;

  std::vector<Individual> population(config.population_size);
  for (auto& ind : population) {
    ind.chromosome.resize(gamma);
    for (auto& bit : ind.chromosome) bit = static_cast<std::uint8_t>(rng() >> 63);
  }
  // Elites carry their objective over; everyone else needs evaluating.
  std::vector<bool> evaluated(population.size(), false);

  GaResult result;
  for (std::size_t gen = 0;; ++gen) {
    double sum = 0.0;
    double gen_best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < population.size(); ++i) {
      Individual& ind = population[i];
      if (!evaluated[i]) {
        if constexpr (memetic) {
          const std::vector<double> start = decode(ind.chromosome, layout);
          std::vector<double> improved = local(std::span<const double>(start));
          for (std::size_t g = 0; g < improved.size(); ++g)
            improved[g] = std::clamp(improved[g], layout.genes[g].lower, layout.genes[g].upper);
          ind.chromosome = encode(improved, layout);
        }
        ind.objective_value = detail::evaluate(objective, ind.chromosome, layout);
        ind.fitness = fitness_from_objective(ind.objective_value);
      }
      sum += ind.objective_value;
      gen_best = std::min(gen_best, ind.objective_value);
      if (ind.objective_value < result.best_objective) {
        result.best_objective = ind.objective_value;
        result.best_chromosome = ind.chromosome;
      }
    }
    result.history.push_back({gen, gen_best, sum / static_cast<double>(population.size()),
                              result.best_objective});

    const std::size_t done = gen + 1;
    if (done >= config.max_generations_cap) break;
    bool stop = false;
    if (const auto* m = std::get_if<MaxGenerations>(&config.termination)) {
      stop = done >= m->generations;
    } else if (const auto* p = std::get_if<FitnessPlateau>(&config.termination)) {
      if (done > p->window) {
        const double before = result.history[done - 1 - p->window].best_ever;
        stop = before - result.best_objective < p->epsilon;
      }
    } else {
      stop = detail::all_identical(population);
    }
    if (stop) break;

    std::vector<std::size_t> order(population.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return population[a].objective_value < population[b].objective_value;
    });

    std::vector<Individual> next;
    next.reserve(population.size());
    std::vector<bool> next_evaluated;
    next_evaluated.reserve(population.size());
    for (std::size_t e = 0; e < config.elitism_count; ++e) {
      next.push_back(population[order[e]]);
      next_evaluated.push_back(true);
    }
    while (next.size() < population.size()) {
      const std::size_t i = select_parent(population, rng);
      const std::size_t j = select_parent(population, rng, i);
      auto [c1, c2] = crossover_n_point(population[i].chromosome, population[j].chromosome,
                                        config.crossover_prob, config.crossover_points, rng);
      mutate_bitflip(c1, config.mutation_prob, rng);
      mutate_bitflip(c2, config.mutation_prob, rng);
      next.push_back({std::move(c1), 0.0, 0.0});
      next_evaluated.push_back(false);
      if (next.size() < population.size()) {
        next.push_back({std::move(c2), 0.0, 0.0});
        next_evaluated.push_back(false);
      }
    }
    population = std::move(next);
    evaluated = std::move(next_evaluated);
  }
  result.best_params = decode(result.best_chromosome, layout);
  return result;
}

}  // namespace mpest::ga
