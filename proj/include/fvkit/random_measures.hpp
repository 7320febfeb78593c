// Discrete random probability measures: stick-breaking priors, Dirichlet
// process posteriors and Monte Carlo checks of the Dirichlet moment identities.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fvkit/rng.hpp"
#include "fvkit/stats.hpp"

namespace fvkit {

/// Stream key reserved for atoms of a finite-discrete base measure; the
/// counter is then the atom index.
inline constexpr std::uint64_t kDiscreteStream = std::numeric_limits<std::uint64_t>::max();

/// A point of S. Identity is (stream, counter); `value` is the coordinate used
/// by interval test sets. Draws from a nonatomic base get a fresh counter, so
/// they never coincide with anything else.
struct Location {
  std::uint64_t stream = 0;
  std::uint64_t counter = 0;
  double value = 0;

  bool same_point(const Location& other) const { return stream == other.stream && counter == other.counter; }
  bool is_discrete_atom() const { return stream == kDiscreteStream; }
};

/// Measurable test set: a half-open interval [lo, hi) of coordinates, or a set
/// of discrete atom indices.
class TestSet {
 public:
  static TestSet interval(double lo, double hi);
  static TestSet atoms(std::vector<std::size_t> indices);
  static TestSet everything();
  static TestSet nothing();

  bool contains(const Location& x) const;
  bool is_everything() const { return kind_ == Kind::Everything; }
  bool is_nothing() const { return kind_ == Kind::Nothing; }
  /// [lo, hi) for interval sets, nullopt otherwise.
  std::optional<std::pair<double, double>> bounds() const;
  std::string describe() const;

  /// Accepts "lo:hi", "all", "none" or "atoms:i,j,k".
  static TestSet parse(const std::string& text);

 private:
  enum class Kind { Interval, Atoms, Everything, Nothing };
  Kind kind_ = Kind::Nothing;
  double lo_ = 0, hi_ = 0;
  std::vector<std::size_t> indices_;
};

class BaseMeasure {
 public:
  enum class Kind { UniformUnit, FiniteDiscrete };

  /// Uniform on [0, 1); nonatomic.
  static BaseMeasure uniform();
  /// Weights must be nonnegative and sum to 1 within 1e-12.
  static BaseMeasure discrete(std::vector<double> locations, std::vector<double> weights);

  Kind kind() const { return kind_; }
  bool is_nonatomic() const { return kind_ == Kind::UniformUnit; }
  const std::vector<double>& locations() const { return locations_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return weights_.size(); }

  Location atom(std::size_t index) const;
  Location draw(Rng& rng) const;
  double measure(const TestSet& set) const;

  nlohmann::json to_json() const;
  static BaseMeasure from_json(const nlohmann::json& j);
  std::string describe() const;

 private:
  Kind kind_ = Kind::UniformUnit;
  std::vector<double> locations_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

struct Atom {
  Location location;
  double weight = 0;
};

struct DiscreteMeasure {
  std::vector<Atom> atoms;
  double residual = 0;  ///< stick mass left unassigned by truncation

  double total_weight() const;
  /// Weight of atoms in the set; the whole space has mass exactly 1 and the
  /// empty set exactly 0.
  double mass(const TestSet& set) const;
  /// Throws std::logic_error on negative weights or a broken mass balance.
  void validate(double tolerance = 1e-12) const;
};

struct StickBreakingParams {
  enum class Preset { Custom, Dirichlet, PoissonDirichlet };

  std::function<double(std::size_t)> alpha;  ///< j -> alpha_j > 0, j >= 1
  std::function<double(std::size_t)> beta;   ///< j -> beta_j > 0, j >= 1
  Preset preset = Preset::Custom;
  double theta = 0;
  double sigma = 0;

  /// alpha_j = 1, beta_j = theta; theta > 0.
  static StickBreakingParams dirichlet(double theta);
  /// alpha_j = 1 - sigma, beta_j = theta + j sigma; 0 <= sigma < 1, theta > -sigma.
  static StickBreakingParams poisson_dirichlet(double sigma, double theta);
  static StickBreakingParams custom(std::function<double(std::size_t)> alpha,
                                    std::function<double(std::size_t)> beta);
  std::string describe() const;
};

struct Truncation {
  enum class Mode { FixedSticks, Residual };
  Mode mode = Mode::Residual;
  std::size_t sticks = 0;
  double epsilon = 1e-8;
  std::size_t stick_cap = 1'000'000;

  static Truncation fixed(std::size_t k);
  static Truncation residual(double epsilon = 1e-8);
  void validate() const;
  std::string describe() const;
};

/// Weights rho_i = w_i prod_{j<i}(1 - w_j), w_j ~ Beta(alpha_j, beta_j), with
/// locations from `base`. Atoms sharing a location are merged. Throws
/// std::runtime_error when residual mode hits the stick cap.
DiscreteMeasure stick_break(const StickBreakingParams& params, const BaseMeasure& base,
                            const Truncation& truncation, Rng& rng);

struct SummabilityReport {
  std::vector<std::pair<std::size_t, double>> ladder;  ///< (J, sum_{j<=J} log(1 + alpha_j/beta_j))
  std::optional<bool> diverges;                        ///< analytic verdict, presets only
};

SummabilityReport check_summability(const StickBreakingParams& params, std::size_t max_j);

struct DirichletPosterior {
  double theta = 1;
  BaseMeasure base;
  std::vector<Location> atoms;

  double total_mass() const { return theta + static_cast<double>(atoms.size()); }
  /// (theta nu_0(A) + #{X_i in A}) / (theta + n).
  double mean_measure(const TestSet& set) const;
};

DirichletPosterior posterior(double theta, const BaseMeasure& base, std::vector<Location> atoms);

DiscreteMeasure sample_posterior(const DirichletPosterior& post, const Truncation& truncation, Rng& rng);

/// k independent draws from mu, renormalised over its atoms. Throws
/// std::invalid_argument when mu.residual >= max_residual.
std::vector<Location> sample_from_measure(const DiscreteMeasure& mu, std::size_t k, Rng& rng,
                                          double max_residual = 0.01);

struct MeanIdentityReport {
  double empirical = 0;
  double expected = 0;  ///< nu_0(A)
  double residual = 0;
  double std_error = 0;
};

MeanIdentityReport check_mean_identity(double theta, const BaseMeasure& base, const TestSet& set,
                                       std::size_t reps, const Truncation& truncation, Rng& rng);

struct MixtureIdentityReport {
  MomentEstimate prior;         ///< mu ~ Pi(theta nu_0)
  MomentEstimate hierarchical;  ///< X ~ nu_0, then mu ~ Pi(theta nu_0 + delta_X)
  double first_residual = 0;
  double first_se = 0;
  double second_residual = 0;
  double second_se = 0;
};

MixtureIdentityReport check_mixture_identity(double theta, const BaseMeasure& base, const TestSet& set,
                                             std::size_t reps, const Truncation& truncation, Rng& rng);

/// Dirichlet prior moments of mu(A): nu(1 - nu) / (1 + theta) and
/// nu(1 + theta nu) / (1 + theta).
double dirichlet_variance(double theta, double nu);
double dirichlet_second_moment(double theta, double nu);

nlohmann::json measure_to_json(const DiscreteMeasure& mu, const BaseMeasure& base, const std::string& lineage);
struct MeasureRecord {
  DiscreteMeasure measure;
  BaseMeasure base;
  std::string lineage;
};
MeasureRecord measure_from_json(const nlohmann::json& j);

}  // namespace fvkit
