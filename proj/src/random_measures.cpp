#include "fvkit/random_measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace fvkit {

namespace {

struct PointKey {
  std::uint64_t stream;
  std::uint64_t counter;
  bool operator==(const PointKey&) const = default;
};

struct PointKeyHash {
  std::size_t operator()(const PointKey& k) const { return splitmix64(k.stream ^ splitmix64(k.counter)); }
};

// Appends weight to the atom at `where`, merging with an existing atom at the
// same point.
class AtomAccumulator {
 public:
  void add(const Location& where, double weight) {
    const PointKey key{where.stream, where.counter};
    auto [it, inserted] = index_.try_emplace(key, atoms_.size());
    if (inserted) {
      atoms_.push_back({where, weight});
    } else {
      atoms_[it->second].weight += weight;
    }
  }
  std::vector<Atom> take() { return std::move(atoms_); }

 private:
  std::vector<Atom> atoms_;
  std::unordered_map<PointKey, std::size_t, PointKeyHash> index_;
};

template <typename LocationSampler>
DiscreteMeasure break_sticks(const StickBreakingParams& params, const Truncation& truncation, Rng& rng,
                             LocationSampler&& sample_location) {
  truncation.validate();
  AtomAccumulator acc;
  double remaining = 1.0;
  std::size_t j = 0;
  for (;;) {
    if (truncation.mode == Truncation::Mode::FixedSticks) {
      if (j >= truncation.sticks) break;
    } else {
      if (remaining < truncation.epsilon) break;
      if (j >= truncation.stick_cap)
        throw std::runtime_error("stick-breaking hit the cap of " + std::to_string(truncation.stick_cap) +
                                 " sticks with residual " + std::to_string(remaining) +
                                 "; the weights may not be summable");
    }
    ++j;
    const double w = rng.beta(params.alpha(j), params.beta(j));
    const double next = remaining * (1.0 - w);
    const double weight = remaining - next;
    remaining = next;
    acc.add(sample_location(), weight);
  }
  return DiscreteMeasure{acc.take(), remaining};
}

}  // namespace

// TestSet

TestSet TestSet::interval(double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("interval needs lo <= hi");
  TestSet s;
  s.kind_ = Kind::Interval;
  s.lo_ = lo;
  s.hi_ = hi;
  return s;
}

TestSet TestSet::atoms(std::vector<std::size_t> indices) {
  TestSet s;
  s.kind_ = Kind::Atoms;
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  s.indices_ = std::move(indices);
  return s;
}

TestSet TestSet::everything() {
  TestSet s;
  s.kind_ = Kind::Everything;
  return s;
}

TestSet TestSet::nothing() { return TestSet{}; }

bool TestSet::contains(const Location& x) const {
  switch (kind_) {
    case Kind::Interval:
      return x.value >= lo_ && x.value < hi_;
    case Kind::Atoms:
      return x.is_discrete_atom() && std::binary_search(indices_.begin(), indices_.end(), x.counter);
    case Kind::Everything:
      return true;
    case Kind::Nothing:
      return false;
  }
  return false;
}

std::optional<std::pair<double, double>> TestSet::bounds() const {
  if (kind_ != Kind::Interval) return std::nullopt;
  return std::make_pair(lo_, hi_);
}

std::string TestSet::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Interval:
      os << "[" << lo_ << "," << hi_ << ")";
      break;
    case Kind::Atoms:
      os << "atoms{";
      for (std::size_t i = 0; i < indices_.size(); ++i) os << (i ? "," : "") << indices_[i];
      os << "}";
      break;
    case Kind::Everything:
      os << "all";
      break;
    case Kind::Nothing:
      os << "none";
      break;
  }
  return os.str();
}

TestSet TestSet::parse(const std::string& text) {
  if (text == "all") return everything();
  if (text == "none") return nothing();
  if (text.rfind("atoms:", 0) == 0) {
    std::vector<std::size_t> idx;
    std::stringstream ss(text.substr(6));
    std::string item;
    while (std::getline(ss, item, ',')) idx.push_back(std::stoul(item));
    return atoms(std::move(idx));
  }
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("test set must be lo:hi, all, none or atoms:i,j");
  try {
    return interval(std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1)));
  } catch (const std::logic_error&) {
    throw std::invalid_argument("cannot parse test set '" + text + "'");
  }
}

// BaseMeasure

BaseMeasure BaseMeasure::uniform() { return BaseMeasure{}; }

BaseMeasure BaseMeasure::discrete(std::vector<double> locations, std::vector<double> weights) {
  if (locations.size() != weights.size() || weights.empty())
    throw std::invalid_argument("discrete base needs matching nonempty locations and weights");
  double total = 0;
  for (double w : weights) {
    if (!(w >= 0)) throw std::invalid_argument("discrete base weights must be >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("discrete base weights must sum to 1");
  BaseMeasure b;
  b.kind_ = Kind::FiniteDiscrete;
  b.locations_ = std::move(locations);
  b.weights_ = std::move(weights);
  b.cumulative_.resize(b.weights_.size());
  std::partial_sum(b.weights_.begin(), b.weights_.end(), b.cumulative_.begin());
  return b;
}

Location BaseMeasure::atom(std::size_t index) const {
  if (kind_ != Kind::FiniteDiscrete || index >= weights_.size())
    throw std::out_of_range("base measure has no atom " + std::to_string(index));
  return Location{kDiscreteStream, index, locations_[index]};
}

Location BaseMeasure::draw(Rng& rng) const {
  if (kind_ == Kind::UniformUnit) {
    const double v = rng.uniform();
    return Location{rng.key(), rng.next_counter(), v};
  }
  const double u = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  std::size_t index = static_cast<std::size_t>(it - cumulative_.begin());
  if (index >= weights_.size()) index = weights_.size() - 1;
  while (weights_[index] == 0 && index > 0) --index;
  return atom(index);
}

double BaseMeasure::measure(const TestSet& set) const {
  if (set.is_everything()) return 1.0;
  if (set.is_nothing()) return 0.0;
  if (kind_ == Kind::UniformUnit) {
    // Atom sets are null under a nonatomic base.
    const auto b = set.bounds();
    if (!b) return 0.0;
    return std::max(0.0, std::min(b->second, 1.0) - std::max(b->first, 0.0));
  }
  double total = 0;
  for (std::size_t i = 0; i < weights_.size(); ++i)
    if (set.contains(atom(i))) total += weights_[i];
  return total;
}

nlohmann::json BaseMeasure::to_json() const {
  if (kind_ == Kind::UniformUnit) return {{"kind", "uniform"}};
  return {{"kind", "discrete"}, {"locations", locations_}, {"weights", weights_}};
}

BaseMeasure BaseMeasure::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "uniform") return uniform();
  if (kind == "discrete")
    return discrete(j.at("locations").get<std::vector<double>>(), j.at("weights").get<std::vector<double>>());
  throw std::invalid_argument("unknown base measure kind '" + kind + "'");
}

std::string BaseMeasure::describe() const {
  if (kind_ == Kind::UniformUnit) return "uniform[0,1)";
  return "discrete(" + std::to_string(weights_.size()) + " atoms)";
}

// DiscreteMeasure

double DiscreteMeasure::total_weight() const {
  double total = 0;
  for (const auto& a : atoms) total += a.weight;
  return total;
}

double DiscreteMeasure::mass(const TestSet& set) const {
  if (set.is_everything()) return 1.0;
  if (set.is_nothing()) return 0.0;
  double total = 0;
  for (const auto& a : atoms)
    if (set.contains(a.location)) total += a.weight;
  return total;
}

void DiscreteMeasure::validate(double tolerance) const {
  for (const auto& a : atoms)
    if (!(a.weight >= 0)) throw std::logic_error("measure has a negative weight");
  if (!(residual >= 0)) throw std::logic_error("measure residual is negative");
  if (std::abs(total_weight() + residual - 1.0) > tolerance)
    throw std::logic_error("measure weights and residual do not sum to 1");
}

// Stick-breaking

StickBreakingParams StickBreakingParams::dirichlet(double theta) {
  if (!(theta > 0)) throw std::invalid_argument("Dirichlet preset requires theta > 0");
  StickBreakingParams p;
  p.alpha = [](std::size_t) { return 1.0; };
  p.beta = [theta](std::size_t) { return theta; };
  p.preset = Preset::Dirichlet;
  p.theta = theta;
  return p;
}

StickBreakingParams StickBreakingParams::poisson_dirichlet(double sigma, double theta) {
  if (!(sigma >= 0 && sigma < 1)) throw std::invalid_argument("Poisson-Dirichlet preset requires 0 <= sigma < 1");
  if (!(theta > -sigma)) throw std::invalid_argument("Poisson-Dirichlet preset requires theta > -sigma");
  StickBreakingParams p;
  p.alpha = [sigma](std::size_t) { return 1.0 - sigma; };
  p.beta = [sigma, theta](std::size_t j) { return theta + static_cast<double>(j) * sigma; };
  p.preset = Preset::PoissonDirichlet;
  p.theta = theta;
  p.sigma = sigma;
  return p;
}

StickBreakingParams StickBreakingParams::custom(std::function<double(std::size_t)> alpha,
                                                std::function<double(std::size_t)> beta) {
  StickBreakingParams p;
  p.alpha = std::move(alpha);
  p.beta = std::move(beta);
  return p;
}

std::string StickBreakingParams::describe() const {
  std::ostringstream os;
  switch (preset) {
    case Preset::Dirichlet:
      os << "DP(theta=" << theta << ")";
      break;
    case Preset::PoissonDirichlet:
      os << "PD(sigma=" << sigma << ",theta=" << theta << ")";
      break;
    case Preset::Custom:
      os << "custom";
      break;
  }
  return os.str();
}

Truncation Truncation::fixed(std::size_t k) {
  Truncation t;
  t.mode = Mode::FixedSticks;
  t.sticks = k;
  return t;
}

Truncation Truncation::residual(double epsilon) {
  Truncation t;
  t.mode = Mode::Residual;
  t.epsilon = epsilon;
  return t;
}

void Truncation::validate() const {
  if (mode == Mode::FixedSticks && sticks < 1) throw std::invalid_argument("fixed truncation needs K >= 1");
  if (mode == Mode::Residual && !(epsilon > 0 && epsilon < 1))
    throw std::invalid_argument("residual truncation needs epsilon in (0, 1)");
}

std::string Truncation::describe() const {
  std::ostringstream os;
  if (mode == Mode::FixedSticks) {
    os << "fixed:" << sticks;
  } else {
    os << "residual:" << epsilon;
  }
  return os.str();
}

DiscreteMeasure stick_break(const StickBreakingParams& params, const BaseMeasure& base,
                            const Truncation& truncation, Rng& rng) {
  return break_sticks(params, truncation, rng, [&] { return base.draw(rng); });
}

SummabilityReport check_summability(const StickBreakingParams& params, std::size_t max_j) {
  if (max_j < 1) throw std::invalid_argument("check_summability requires J >= 1");
  SummabilityReport report;
  double sum = 0;
  std::size_t next_rung = 1;
  for (std::size_t j = 1; j <= max_j; ++j) {
    sum += std::log1p(params.alpha(j) / params.beta(j));
    if (j == next_rung || j == max_j) {
      report.ladder.emplace_back(j, sum);
      if (j == next_rung) next_rung *= 10;
    }
  }
  // Both presets have alpha_j / beta_j bounded below by a multiple of 1/j.
  if (params.preset != StickBreakingParams::Preset::Custom) report.diverges = true;
  return report;
}

double DirichletPosterior::mean_measure(const TestSet& set) const {
  double hits = 0;
  for (const auto& x : atoms)
    if (set.is_everything() || set.contains(x)) hits += 1;
  return (theta * base.measure(set) + hits) / total_mass();
}

DirichletPosterior posterior(double theta, const BaseMeasure& base, std::vector<Location> atoms) {
  if (!(theta > 0)) throw std::invalid_argument("posterior requires theta > 0");
  return DirichletPosterior{theta, base, std::move(atoms)};
}

DiscreteMeasure sample_posterior(const DirichletPosterior& post, const Truncation& truncation, Rng& rng) {
  const double mass = post.total_mass();
  const auto params = StickBreakingParams::dirichlet(mass);
  const std::size_t n = post.atoms.size();
  return break_sticks(params, truncation, rng, [&]() -> Location {
    if (n == 0) return post.base.draw(rng);
    const double u = rng.uniform() * mass;
    if (u < post.theta) return post.base.draw(rng);
    const auto i = std::min(n - 1, static_cast<std::size_t>((u - post.theta)));
    return post.atoms[i];
  });
}

std::vector<Location> sample_from_measure(const DiscreteMeasure& mu, std::size_t k, Rng& rng,
                                          double max_residual) {
  if (mu.residual >= max_residual)
    throw std::invalid_argument("measure residual " + std::to_string(mu.residual) + " too large to sample from");
  if (mu.atoms.empty()) throw std::invalid_argument("cannot sample from a measure without atoms");
  std::vector<Location> out;
  if (k == 0) return out;
  std::vector<double> cumulative(mu.atoms.size());
  double acc = 0;
  for (std::size_t i = 0; i < mu.atoms.size(); ++i) cumulative[i] = acc += mu.atoms[i].weight;
  out.reserve(k);
  for (std::size_t draw = 0; draw < k; ++draw) {
    const double u = rng.uniform() * acc;
    auto i = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    if (i >= mu.atoms.size()) i = mu.atoms.size() - 1;
    out.push_back(mu.atoms[i].location);
  }
  return out;
}

double dirichlet_variance(double theta, double nu) { return nu * (1 - nu) / (1 + theta); }

double dirichlet_second_moment(double theta, double nu) { return nu * (1 + theta * nu) / (1 + theta); }

MeanIdentityReport check_mean_identity(double theta, const BaseMeasure& base, const TestSet& set,
                                       std::size_t reps, const Truncation& truncation, Rng& rng) {
  if (reps < 2) throw std::invalid_argument("check_mean_identity needs reps >= 2");
  const auto params = StickBreakingParams::dirichlet(theta);
  std::vector<double> values(reps);
  for (auto& v : values) v = stick_break(params, base, truncation, rng).mass(set);
  const MomentEstimate est = estimate_moments(values);
  MeanIdentityReport rep;
  rep.empirical = est.mean;
  rep.expected = base.measure(set);
  rep.residual = std::abs(rep.empirical - rep.expected);
  rep.std_error = est.mean_se;
  return rep;
}

MixtureIdentityReport check_mixture_identity(double theta, const BaseMeasure& base, const TestSet& set,
                                             std::size_t reps, const Truncation& truncation, Rng& rng) {
  if (reps < 2) throw std::invalid_argument("check_mixture_identity needs reps >= 2");
  const auto params = StickBreakingParams::dirichlet(theta);
  std::vector<double> prior(reps), hierarchical(reps);
  for (auto& v : prior) v = stick_break(params, base, truncation, rng).mass(set);
  for (auto& v : hierarchical) {
    const Location x = base.draw(rng);
    v = sample_posterior(posterior(theta, base, {x}), truncation, rng).mass(set);
  }
  MixtureIdentityReport rep;
  rep.prior = estimate_moments(prior);
  rep.hierarchical = estimate_moments(hierarchical);
  rep.first_residual = std::abs(rep.prior.mean - rep.hierarchical.mean);
  rep.first_se = std::hypot(rep.prior.mean_se, rep.hierarchical.mean_se);
  rep.second_residual = std::abs(rep.prior.second_moment - rep.hierarchical.second_moment);
  rep.second_se = std::hypot(rep.prior.second_moment_se, rep.hierarchical.second_moment_se);
  return rep;
}

nlohmann::json measure_to_json(const DiscreteMeasure& mu, const BaseMeasure& base, const std::string& lineage) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : mu.atoms)
    atoms.push_back({{"stream", a.location.stream},
                     {"counter", a.location.counter},
                     {"value", a.location.value},
                     {"weight", a.weight}});
  return {{"atoms", atoms}, {"residual", mu.residual}, {"base", base.to_json()}, {"lineage", lineage}};
}

MeasureRecord measure_from_json(const nlohmann::json& j) {
  MeasureRecord rec;
  for (const auto& a : j.at("atoms")) {
    rec.measure.atoms.push_back(
        {Location{a.at("stream").get<std::uint64_t>(), a.at("counter").get<std::uint64_t>(), a.at("value").get<double>()},
         a.at("weight").get<double>()});
  }
  rec.measure.residual = j.at("residual").get<double>();
  rec.base = BaseMeasure::from_json(j.at("base"));
  rec.lineage = j.value("lineage", "");
  return rec;
}

}  // namespace fvkit
