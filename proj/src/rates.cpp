#include "bdlat/rates.hpp"

#include <algorithm>
#include <cmath>

#include "bdlat/errors.hpp"

namespace bdlat {

SiteRates::SiteRates(WindowPtr window, int radius) : window_(std::move(window)) {
  const std::size_t n = window_->size();
  dep_begin_.reserve(n + 1);
  dep_begin_.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    auto near = window_->within(i, std::max(radius, 0));
    dependents_.insert(dependents_.end(), near.begin(), near.end());
    dep_begin_.push_back(dependents_.size());
  }
}

Stencil::Stencil(const Window& window, const Kernel& kernel) {
  begin_.reserve(window.size() + 1);
  begin_.push_back(0);
  for (std::size_t i = 0; i < window.size(); ++i) {
    const Site& x = window.site(i);
    for (const auto& [z, v] : kernel.support()) {
      if (auto j = window.index_of(x - z)) {  // y = x - z, a(x - y) = a(z)
        index_.push_back(*j);
        weight_.push_back(v);
      }
    }
    begin_.push_back(index_.size());
  }
}

std::optional<Kernel> RateModel::dominating_kernel(int, int) const { return std::nullopt; }

namespace {

std::size_t require_index(const Window& w, const Site& x) {
  auto i = w.index_of(x);
  if (!i) throw ConfigError("rate evaluated at " + x.str() + ", outside the window");
  return *i;
}

void require_even(const Kernel& k, const char* name) {
  if (!k.is_even()) throw ConfigError(std::string(name) + " kernel must be even");
}

int kernel_range(const Kernel& k) { return std::max(k.range(), 0); }

//--- BPDL ------------------------------------------------------------------//

class BPDLModel final : public RateModel {
 public:
  BPDLModel(BPDLParams p, std::string tag) : p_(std::move(p)), tag_(std::move(tag)) {}

  std::string tag() const override { return tag_; }
  int interaction_radius() const override { return std::max(kernel_range(p_.a_plus), kernel_range(p_.a_minus)); }

  std::unique_ptr<SiteRates> bind(WindowPtr window) const override {
    return std::make_unique<Bound>(std::move(window), *this);
  }

  std::optional<Kernel> dominating_kernel(int dim, int occupancy_limit) const override {
    // d(x,xi) - d(x,eta) >= -eta(x) sum a-(x-y)|xi(y)-eta(y)| when xi(x) >= eta(x)
    return with_dim(p_.a_plus, dim) + with_dim(p_.a_minus, dim).scaled(occupancy_limit);
  }

  std::shared_ptr<const RateModel> closed_form_envelope() const override {
    BPDLParams e{p_.b0, 0.0, p_.a_plus, Kernel::zero(p_.a_plus.dim())};
    return std::make_shared<BPDLModel>(std::move(e), "envelope(" + tag_ + ")");
  }

  const BPDLParams& params() const { return p_; }

 private:
  static Kernel with_dim(const Kernel& k, int dim) { return k.support().empty() ? Kernel::zero(dim) : k; }

  class Bound final : public BatchedRates<Bound> {
   public:
    Bound(WindowPtr w, const BPDLModel& m)
        : BatchedRates(w, m.interaction_radius()), b0_(m.p_.b0), m_(m.p_.m), plus_(*w, m.p_.a_plus),
          minus_(*w, m.p_.a_minus) {}
    double birth(std::size_t i, std::span<const int> occ) const override { return b0_ + plus_.apply(i, occ); }
    double death(std::size_t i, std::span<const int> occ) const override {
      const int n = occ[i];
      return n == 0 ? 0.0 : n * (m_ + minus_.apply(i, occ));
    }

   private:
    double b0_, m_;
    Stencil plus_, minus_;
  };

  BPDLParams p_;
  std::string tag_;
};

//--- aggregation -----------------------------------------------------------//

class AggregationModel final : public RateModel {
 public:
  explicit AggregationModel(AggregationParams p) : p_(std::move(p)) {}

  std::string tag() const override { return "aggregation"; }
  int interaction_radius() const override {
    int r = kernel_range(p_.phi);
    if (p_.birth_mode == AggregationBirth::BPDL) r = std::max(r, kernel_range(p_.a_plus));
    return r;
  }
  std::unique_ptr<SiteRates> bind(WindowPtr window) const override {
    return std::make_unique<Bound>(std::move(window), *this);
  }
  std::optional<Kernel> dominating_kernel(int dim, int) const override {
    // e^{-cs} and 1/(1+cs) are c-Lipschitz on s >= 0.
    Kernel k = p_.phi.support().empty() ? Kernel::zero(dim) : p_.phi.scaled(p_.c);
    if (p_.birth_mode == AggregationBirth::BPDL && !p_.a_plus.support().empty()) k = k + p_.a_plus;
    return k;
  }
  std::shared_ptr<const RateModel> closed_form_envelope() const override {
    BPDLParams e;
    const int dim = p_.phi.dim();
    if (p_.birth_mode == AggregationBirth::Constant) {
      e = {p_.c, 0.0, Kernel::zero(dim), Kernel::zero(dim)};
    } else {
      e = {p_.b0, 0.0, p_.a_plus, Kernel::zero(dim)};
    }
    return bpdl_envelope(std::move(e), "envelope(aggregation)");
  }

  static ModelPtr bpdl_envelope(BPDLParams p, std::string tag) {
    return std::make_shared<BPDLModel>(std::move(p), std::move(tag));
  }

 private:
  class Bound final : public BatchedRates<Bound> {
   public:
    Bound(WindowPtr w, const AggregationModel& m)
        : BatchedRates(w, m.interaction_radius()), p_(m.p_), phi_(*w, m.p_.phi), plus_(*w, m.p_.a_plus) {
      p_.phi = Kernel();
      p_.a_plus = Kernel();
    }
    double birth(std::size_t i, std::span<const int> occ) const override {
      return p_.birth_mode == AggregationBirth::Constant ? p_.c : p_.b0 + plus_.apply(i, occ);
    }
    double death(std::size_t i, std::span<const int> occ) const override {
      if (occ[i] == 0) return 0.0;
      const double s = phi_.apply(i, occ);
      return p_.death_form == AggregationDeath::Exponential ? std::exp(-p_.c * s) : 1.0 / (1.0 + p_.c * s);
    }

   private:
    AggregationParams p_;
    Stencil phi_, plus_;
  };

  AggregationParams p_;
};

//--- contact ---------------------------------------------------------------//

class ContactModel final : public RateModel {
 public:
  explicit ContactModel(double lambda) : lambda_(lambda) {}

  std::string tag() const override { return "contact"; }
  int interaction_radius() const override { return 1; }
  std::optional<int> occupancy_bound() const override { return 1; }
  std::unique_ptr<SiteRates> bind(WindowPtr window) const override {
    return std::make_unique<Bound>(std::move(window), lambda_);
  }
  std::optional<Kernel> dominating_kernel(int dim, int) const override { return Kernel::box(dim, lambda_, 1); }
  std::shared_ptr<const RateModel> closed_form_envelope() const override {
    // alpha(x) = 0 <= eta(x) is always allowed, which removes the indicator
    // and the eta(x) term of the sum.
    return neighbour_birth_envelope(lambda_, false, "envelope(contact)");
  }

  static ModelPtr neighbour_birth_envelope(double lambda, bool centre, std::string tag);

 private:
  class Bound final : public BatchedRates<Bound> {
   public:
    Bound(WindowPtr w, double lambda) : BatchedRates(w, 1), lambda_(lambda), near_(*w, Kernel::box(w->dim(), 1.0, 1)) {}
    double birth(std::size_t i, std::span<const int> occ) const override {
      return occ[i] == 0 ? lambda_ * near_.apply(i, occ) : 0.0;
    }
    double death(std::size_t i, std::span<const int> occ) const override { return occ[i] > 0 ? 1.0 : 0.0; }

   private:
    double lambda_;
    Stencil near_;
  };

  double lambda_;
};

/// lambda sum_{|y-x|<=1} eta(y) (y = x included when `centre`), death 0.
/// Kernel built at bind time so one model serves every dimension.
class NeighbourBirthModel final : public RateModel {
 public:
  NeighbourBirthModel(double lambda, bool centre, std::string tag)
      : lambda_(lambda), centre_(centre), tag_(std::move(tag)) {}
  std::string tag() const override { return tag_; }
  int interaction_radius() const override { return 1; }
  std::unique_ptr<SiteRates> bind(WindowPtr window) const override {
    return std::make_unique<Bound>(std::move(window), lambda_, centre_);
  }
  std::optional<Kernel> dominating_kernel(int dim, int) const override { return Kernel::box(dim, lambda_, 1); }

 private:
  class Bound final : public BatchedRates<Bound> {
   public:
    Bound(WindowPtr w, double lambda, bool centre)
        : BatchedRates(w, 1), lambda_(lambda), near_(*w, stencil_kernel(w->dim(), centre)) {}
    double birth(std::size_t i, std::span<const int> occ) const override { return lambda_ * near_.apply(i, occ); }
    double death(std::size_t, std::span<const int>) const override { return 0.0; }

   private:
    double lambda_;
    Stencil near_;
  };
  static Kernel stencil_kernel(int dim, bool centre) {
    Kernel k = Kernel::box(dim, 1.0, 1);
    if (centre) return k;
    auto support = k.support();
    std::erase_if(support, [](const auto& e) { return e.first.norm1() == 0; });
    return Kernel(dim, std::move(support));
  }

  double lambda_;
  bool centre_;
  std::string tag_;
};

ModelPtr ContactModel::neighbour_birth_envelope(double lambda, bool centre, std::string tag) {
  return std::make_shared<NeighbourBirthModel>(lambda, centre, std::move(tag));
}

//--- branching birth, local death ------------------------------------------//

class BranchLocalModel final : public RateModel {
 public:
  explicit BranchLocalModel(BranchLocalParams p) : p_(std::move(p)) {}

  std::string tag() const override { return "branch-local"; }
  int interaction_radius() const override { return 1; }
  std::unique_ptr<SiteRates> bind(WindowPtr window) const override {
    return std::make_unique<Bound>(std::move(window), p_);
  }
  std::optional<Kernel> dominating_kernel(int dim, int) const override { return Kernel::box(dim, p_.lambda, 1); }
  std::shared_ptr<const RateModel> closed_form_envelope() const override {
    return ContactModel::neighbour_birth_envelope(p_.lambda, true, "envelope(branch-local)");
  }

 private:
  class Bound final : public BatchedRates<Bound> {
   public:
    Bound(WindowPtr w, const BranchLocalParams& p)
        : BatchedRates(w, 1), lambda_(p.lambda), near_(*w, Kernel::box(w->dim(), 1.0, 1)) {
      // g tabulated for the occupancies that matter in practice
      table_.resize(1024);
      for (int n = 0; n < static_cast<int>(table_.size()); ++n) table_[static_cast<std::size_t>(n)] = p.g.g(n);
      g_ = p.g.g;
    }
    double birth(std::size_t i, std::span<const int> occ) const override { return lambda_ * near_.apply(i, occ); }
    double death(std::size_t i, std::span<const int> occ) const override {
      const int n = occ[i];
      return n < static_cast<int>(table_.size()) ? table_[static_cast<std::size_t>(n)] : g_(n);
    }

   private:
    double lambda_;
    Stencil near_;
    std::vector<double> table_;
    std::function<double(int)> g_;
  };

  BranchLocalParams p_;
};

//--- frozen, capped, custom -------------------------------------------------//

class FrozenModel final : public RateModel {
 public:
  std::string tag() const override { return "frozen"; }
  int interaction_radius() const override { return 0; }
  std::unique_ptr<SiteRates> bind(WindowPtr window) const override { return std::make_unique<Bound>(std::move(window)); }
  std::optional<Kernel> dominating_kernel(int dim, int) const override { return Kernel::zero(dim); }
  std::shared_ptr<const RateModel> closed_form_envelope() const override {
    return std::make_shared<FrozenModel>();
  }

 private:
  class Bound final : public BatchedRates<Bound> {
   public:
    explicit Bound(WindowPtr w) : BatchedRates(std::move(w), 0) {}
    double birth(std::size_t, std::span<const int>) const override { return 0.0; }
    double death(std::size_t, std::span<const int>) const override { return 0.0; }
  };
};

class CappedModel final : public RateModel {
 public:
  CappedModel(ModelPtr inner, int cap) : inner_(std::move(inner)), cap_(cap) {}

  std::string tag() const override { return inner_->tag() + "+cap" + std::to_string(cap_); }
  int interaction_radius() const override { return inner_->interaction_radius(); }
  std::optional<int> occupancy_bound() const override {
    auto b = inner_->occupancy_bound();
    return b ? std::min(*b, cap_) : cap_;
  }
  std::optional<Kernel> dominating_kernel(int dim, int limit) const override {
    return inner_->dominating_kernel(dim, std::min(limit, cap_));
  }
  std::unique_ptr<SiteRates> bind(WindowPtr window) const override {
    return std::make_unique<Bound>(window, inner_->bind(window), cap_, inner_->interaction_radius());
  }

 private:
  class Bound final : public BatchedRates<Bound> {
   public:
    Bound(WindowPtr w, std::unique_ptr<SiteRates> inner, int cap, int radius)
        : BatchedRates(std::move(w), radius), inner_(std::move(inner)), cap_(cap) {}
    double birth(std::size_t i, std::span<const int> occ) const override {
      return occ[i] < cap_ ? inner_->birth(i, occ) : 0.0;
    }
    double death(std::size_t i, std::span<const int> occ) const override { return inner_->death(i, occ); }

   private:
    std::unique_ptr<SiteRates> inner_;
    int cap_;
  };

  ModelPtr inner_;
  int cap_;
};

class CustomModel final : public RateModel {
 public:
  CustomModel(std::string tag, int radius, RateFunction b, RateFunction d, std::optional<Kernel> dom,
              std::optional<int> bound)
      : tag_(std::move(tag)), radius_(radius), b_(std::move(b)), d_(std::move(d)), dom_(std::move(dom)),
        bound_(bound) {}

  std::string tag() const override { return tag_; }
  int interaction_radius() const override { return radius_; }
  std::optional<int> occupancy_bound() const override { return bound_; }
  std::optional<Kernel> dominating_kernel(int, int) const override { return dom_; }
  std::unique_ptr<SiteRates> bind(WindowPtr window) const override {
    return std::make_unique<Bound>(std::move(window), *this);
  }

 private:
  class Bound final : public BatchedRates<Bound> {
   public:
    Bound(WindowPtr w, const CustomModel& m) : BatchedRates(w, m.radius_), b_(m.b_), d_(m.d_) {}
    double birth(std::size_t i, std::span<const int> occ) const override {
      return b_(window().site(i), Configuration::from_dense(window_ptr(), occ));
    }
    double death(std::size_t i, std::span<const int> occ) const override {
      return d_(window().site(i), Configuration::from_dense(window_ptr(), occ));
    }

   private:
    RateFunction b_, d_;
  };

  std::string tag_;
  int radius_;
  RateFunction b_, d_;
  std::optional<Kernel> dom_;
  std::optional<int> bound_;
};

//--- brute-force envelope --------------------------------------------------//

class BruteForceEnvelope final : public RateModel {
 public:
  BruteForceEnvelope(ModelPtr inner, std::size_t probe_cap) : inner_(std::move(inner)), probe_cap_(probe_cap) {}

  std::string tag() const override { return "envelope(" + inner_->tag() + ")"; }
  int interaction_radius() const override { return inner_->interaction_radius(); }
  std::optional<Kernel> dominating_kernel(int dim, int limit) const override {
    return inner_->dominating_kernel(dim, limit);
  }
  std::unique_ptr<SiteRates> bind(WindowPtr window) const override {
    return std::make_unique<Bound>(window, inner_->bind(window), inner_->interaction_radius(), probe_cap_);
  }

 private:
  class Bound final : public BatchedRates<Bound> {
   public:
    Bound(WindowPtr w, std::unique_ptr<SiteRates> inner, int radius, std::size_t probe_cap)
        : BatchedRates(std::move(w), radius), inner_(std::move(inner)), probe_cap_(probe_cap) {}

    double birth(std::size_t i, std::span<const int> occ) const override {
      // alpha differs from eta only on the neighbourhood of i; the rate at i
      // cannot see anything else.
      auto near = dependents(i);
      std::size_t space = 1;
      for (auto j : near) {
        space *= static_cast<std::size_t>(occ[j]) + 1;
        if (space > probe_cap_)
          throw ConfigError("pure-birth envelope: probe space at " + window().site(i).str() + " exceeds probe_cap " +
                            std::to_string(probe_cap_));
      }
      std::vector<int> alpha(occ.begin(), occ.end());
      for (auto j : near) alpha[j] = 0;
      double best = inner_->birth(i, alpha);
      // odometer over alpha(j) in [0, occ(j)]
      while (true) {
        std::size_t k = 0;
        for (; k < near.size(); ++k) {
          auto j = near[k];
          if (alpha[j] < occ[j]) {
            ++alpha[j];
            break;
          }
          alpha[j] = 0;
        }
        if (k == near.size()) break;
        best = std::max(best, inner_->birth(i, alpha));
      }
      return best;
    }
    double death(std::size_t, std::span<const int>) const override { return 0.0; }

   private:
    std::unique_ptr<SiteRates> inner_;
    std::size_t probe_cap_;
  };

  ModelPtr inner_;
  std::size_t probe_cap_;
};

}  // namespace

double RateModel::birth(const Site& x, const Configuration& eta) const {
  auto bound = bind(eta.window_ptr());
  return bound->birth(require_index(eta.window(), x), eta.dense());
}

double RateModel::death(const Site& x, const Configuration& eta) const {
  auto bound = bind(eta.window_ptr());
  return bound->death(require_index(eta.window(), x), eta.dense());
}

ModelPtr bpdl_rates(const BPDLParams& p) {
  if (!(p.b0 >= 0.0)) throw ConfigError("bpdl requires b0 >= 0");
  if (!(p.m >= 0.0)) throw ConfigError("bpdl requires m >= 0");
  require_even(p.a_plus, "bpdl a_plus");
  require_even(p.a_minus, "bpdl a_minus");
  return std::make_shared<BPDLModel>(p, "bpdl");
}

ModelPtr aggregation_rates(const AggregationParams& p) {
  if (!(p.c > 0.0)) throw ConfigError("aggregation requires c > 0");
  require_even(p.phi, "aggregation phi");
  if (p.birth_mode == AggregationBirth::BPDL) {
    if (!(p.b0 >= 0.0)) throw ConfigError("aggregation BPDL-style birth requires b0 >= 0");
    require_even(p.a_plus, "aggregation a_plus");
  }
  return std::make_shared<AggregationModel>(p);
}

ModelPtr contact_rates(double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("contact process requires lambda > 0");
  return std::make_shared<ContactModel>(lambda);
}

void validate_death_curve(const DeathCurve& g) {
  if (!g.g) throw ConfigError("death curve g is empty");
  if (g.g(0) != 0.0) throw ConfigError("death curve requires g(0) = 0");
  if (g.g(1) != 1.0) throw ConfigError("death curve requires g(1) = 1");
  double prev = 0.0;
  for (int n = 0; n <= 1000; ++n) {
    const double v = g.g(n);
    if (v < prev) throw ConfigError("death curve must be non-decreasing (fails at n=" + std::to_string(n) + ")");
    if (v < n) throw ConfigError("death curve requires g(n) >= n (fails at n=" + std::to_string(n) + ")");
    prev = v;
  }
}

ModelPtr branch_local_rates(const BranchLocalParams& p) {
  if (!(p.lambda >= 0.0)) throw ConfigError("branch-local model requires lambda >= 0");
  validate_death_curve(p.g);
  return std::make_shared<BranchLocalModel>(p);
}

ModelPtr frozen_rates() { return std::make_shared<FrozenModel>(); }

ModelPtr capped(ModelPtr model, int cap) {
  if (!model) throw ConfigError("capped: null model");
  if (cap < 1) throw ConfigError("occupancy cap must be >= 1");
  return std::make_shared<CappedModel>(std::move(model), cap);
}

ModelPtr custom_rates(std::string tag, int interaction_radius, RateFunction birth, RateFunction death,
                      std::optional<Kernel> dominating, std::optional<int> occupancy_bound) {
  if (interaction_radius < 0) throw ConfigError("custom models must declare a finite interaction radius");
  return std::make_shared<CustomModel>(std::move(tag), interaction_radius, std::move(birth), std::move(death),
                                       std::move(dominating), occupancy_bound);
}

ModelPtr pure_birth_envelope(ModelPtr model, std::size_t probe_cap) {
  if (!model) throw ConfigError("pure_birth_envelope: null model");
  if (auto closed = model->closed_form_envelope()) return closed;
  return std::make_shared<BruteForceEnvelope>(std::move(model), probe_cap);
}

}  // namespace bdlat
