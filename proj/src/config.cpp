#include "ipe/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "ipe/error.hpp"
#include "ipe/io.hpp"
#include "ipe/random.hpp"

namespace ipe {

namespace {

using nlohmann::json;

constexpr const char* kModule = "config";

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw Error(ErrorCode::Schema, kModule, path + ": " + message);
}

// A JSON value plus its dotted path, for error messages.
class Node {
public:
    Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

    const std::string& path() const { return path_; }
    const json& raw() const { return *j_; }
    bool is_object() const { return j_->is_object(); }
    bool is_number() const { return j_->is_number(); }
    bool is_string() const { return j_->is_string(); }

    std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }
    Node at(const std::string& key) const {
        expect_object();
        if (!j_->contains(key)) fail(child_path(key), "required field missing");
        return Node((*j_)[key], child_path(key));
    }
    Node at(std::size_t i) const { return Node((*j_)[i], path_ + "[" + std::to_string(i) + "]"); }
    std::size_t size() const {
        if (!j_->is_array()) fail(path_, "expected an array");
        return j_->size();
    }
    void expect_object() const {
        if (!j_->is_object()) fail(path_, "expected an object");
    }
    // Rejects keys outside `allowed` so typos surface as errors.
    void only(std::initializer_list<const char*> allowed) const {
        expect_object();
        for (const auto& [key, value] : j_->items()) {
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
                fail(child_path(key), "unknown field");
            }
        }
    }

    double number() const {
        if (!j_->is_number()) fail(path_, "expected a number");
        const double v = j_->get<double>();
        if (!std::isfinite(v)) fail(path_, "expected a finite number");
        return v;
    }
    double positive() const {
        const double v = number();
        if (!(v > 0.0)) fail(path_, "must be positive");
        return v;
    }
    std::uint64_t uint64() const {
        if (!j_->is_number_unsigned() && !(j_->is_number_integer() && j_->get<std::int64_t>() >= 0)) {
            fail(path_, "expected a nonnegative integer");
        }
        return j_->get<std::uint64_t>();
    }
    std::string str() const {
        if (!j_->is_string()) fail(path_, "expected a string");
        return j_->get<std::string>();
    }
    bool boolean() const {
        if (!j_->is_boolean()) fail(path_, "expected true or false");
        return j_->get<bool>();
    }
    std::vector<double> numbers() const {
        std::vector<double> out;
        for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).number());
        return out;
    }
    std::vector<std::string> strings() const {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).str());
        return out;
    }

private:
    const json* j_;
    std::string path_;
};

// Scalar distribution: a bare number is a constant.
struct Dist {
    enum class Kind { Constant, Normal, Uniform, LogNormal, Choice } kind = Kind::Constant;
    double a = 0.0, b = 0.0;
    std::vector<double> values;

    bool constant() const { return kind == Kind::Constant; }
    double draw(Rng& rng) const {
        switch (kind) {
            case Kind::Constant: return a;
            case Kind::Normal: return rng.normal(a, b);
            case Kind::Uniform: return rng.uniform(a, b);
            case Kind::LogNormal: return std::exp(rng.normal(a, b));
            case Kind::Choice: {
                auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(values.size()));
                return values[std::min(k, values.size() - 1)];
            }
        }
        return a;
    }
};

Dist parse_dist(const Node& n) {
    Dist d;
    if (n.is_number()) {
        d.a = n.number();
        return d;
    }
    const std::string kind = n.at("dist").str();
    if (kind == "constant") {
        n.only({"dist", "value"});
        d.a = n.at("value").number();
    } else if (kind == "normal") {
        n.only({"dist", "mean", "sd"});
        d.kind = Dist::Kind::Normal;
        d.a = n.at("mean").number();
        d.b = n.at("sd").number();
        if (d.b < 0.0) fail(n.child_path("sd"), "must be nonnegative");
    } else if (kind == "uniform") {
        n.only({"dist", "lo", "hi"});
        d.kind = Dist::Kind::Uniform;
        d.a = n.at("lo").number();
        d.b = n.at("hi").number();
        if (!(d.b >= d.a)) fail(n.child_path("hi"), "must be at least lo");
    } else if (kind == "lognormal") {
        n.only({"dist", "mu", "sigma"});
        d.kind = Dist::Kind::LogNormal;
        d.a = n.at("mu").number();
        d.b = n.at("sigma").number();
        if (d.b < 0.0) fail(n.child_path("sigma"), "must be nonnegative");
    } else if (kind == "choice") {
        n.only({"dist", "values"});
        d.kind = Dist::Kind::Choice;
        d.values = n.at("values").numbers();
        if (d.values.empty()) fail(n.child_path("values"), "must be nonempty");
    } else {
        fail(n.child_path("dist"), "unknown distribution '" + kind + "' (constant, normal, uniform, lognormal, choice)");
    }
    return d;
}

struct GridSpec {
    double lo = 0.0, hi = 0.0;
    std::size_t points = 0;
};

GridSpec parse_grid(const Node& n) {
    n.only({"lo", "hi", "points"});
    GridSpec g{n.at("lo").number(), n.at("hi").number(), static_cast<std::size_t>(n.at("points").uint64())};
    if (!(g.hi > g.lo)) fail(n.child_path("hi"), "must exceed lo");
    if (g.points < 2) fail(n.child_path("points"), "need at least two points");
    return g;
}

Feature parse_feature(const Node& n, const std::optional<GridSpec>& grid) {
    if (n.is_string()) {
        const std::string s = n.str();
        if (s == "mean") return Feature::mean();
        if (s == "second_moment") return Feature::second_moment();
        if (s == "variance") return Feature::variance();
        fail(n.path(), "unknown feature '" + s + "' (mean, second_moment, variance, or {kind: moment, phi: [...]})");
    }
    n.only({"kind", "phi"});
    if (n.at("kind").str() != "moment") fail(n.child_path("kind"), "expected 'moment'");
    auto phi = n.at("phi").numbers();
    if (!grid) fail(n.path(), "moment features need belief_model 'grid'");
    if (phi.size() != grid->points) fail(n.child_path("phi"), "needs one value per state grid point");
    return Feature::moment(std::move(phi));
}

struct RuleSpec {
    std::string kind;
    Dist tau, chi0, chi1, shift;
    std::optional<std::pair<double, double>> anchor;  // (mean, variance); empty = agent's own prior
};

RuleSpec parse_rule(const Node& n, bool grid_model) {
    RuleSpec r;
    r.kind = n.at("kind").str();
    if (r.kind == "none" || r.kind == "bayesian") {
        n.only({"kind"});
    } else if (r.kind == "anchored") {
        n.only({"kind", "tau", "anchor"});
        if (!grid_model) fail(n.child_path("kind"), "anchored updating needs belief_model 'grid'");
        r.tau = parse_dist(n.at("tau"));
        if (n.has("anchor")) {
            const Node a = n.at("anchor");
            if (a.is_string()) {
                if (a.str() != "prior") fail(a.path(), "expected 'prior' or {mean, variance}");
            } else {
                a.only({"mean", "variance"});
                r.anchor = std::make_pair(a.at("mean").number(), a.at("variance").positive());
            }
        }
    } else if (r.kind == "grether") {
        n.only({"kind", "chi0", "chi1"});
        r.chi0 = parse_dist(n.at("chi0"));
        r.chi1 = parse_dist(n.at("chi1"));
    } else if (r.kind == "drift") {
        n.only({"kind", "shift"});
        r.shift = parse_dist(n.at("shift"));
    } else {
        fail(n.child_path("kind"), "unknown rule '" + r.kind + "' (none, bayesian, anchored, grether, drift)");
    }
    return r;
}

struct GroupSpec {
    RuleSpec rule;
    Dist noise;
    std::optional<GridSpec> signal_grid;
    SnapMode snap = SnapMode::Nearest;
    std::string path;
    std::string key;  // canonical JSON; groups with equal keys share one draw per agent
};

struct ActionSpec {
    std::string kind;
    Dist theta0, theta1;
    std::vector<double> coefficients;
    LinkAction link;
    GridSpec thresholds;
    double threshold_mean = 0.0, threshold_variance = 1.0;
};

ActionSpec parse_action(const Node& n) {
    ActionSpec a;
    a.kind = n.at("kind").str();
    if (a.kind == "affine") {
        n.only({"kind", "theta0", "theta1"});
        a.theta0 = n.has("theta0") ? parse_dist(n.at("theta0")) : Dist{};
        a.theta1 = parse_dist(n.at("theta1"));
    } else if (a.kind == "polynomial") {
        n.only({"kind", "coefficients"});
        a.coefficients = n.at("coefficients").numbers();
        if (a.coefficients.empty()) fail(n.child_path("coefficients"), "must be nonempty");
    } else if (a.kind == "link") {
        n.only({"kind", "map", "theta", "frozen", "focal"});
        const std::string map = n.has("map") ? n.at("map").str() : "logistic";
        if (map == "logistic") a.link.map = LinkMap::logistic();
        else if (map != "identity") fail(n.child_path("map"), "expected 'identity' or 'logistic'");
        a.link.theta = n.at("theta").numbers();
        a.link.frozen = n.has("frozen") ? n.at("frozen").numbers() : std::vector<double>(a.link.theta.size(), 0.0);
        a.link.focal = n.has("focal") ? static_cast<std::size_t>(n.at("focal").uint64()) : 0;
        try {
            validate_action(a.link);
        } catch (const Error& e) {
            fail(n.path(), e.what());
        }
    } else if (a.kind == "binary_latent") {
        n.only({"kind", "thresholds"});
        const Node t = n.at("thresholds");
        t.only({"lo", "hi", "points", "mean", "variance"});
        a.thresholds = GridSpec{t.at("lo").number(), t.at("hi").number(), static_cast<std::size_t>(t.at("points").uint64())};
        if (!(a.thresholds.hi > a.thresholds.lo) || a.thresholds.points < 2) fail(t.path(), "invalid threshold grid");
        a.threshold_mean = t.at("mean").number();
        a.threshold_variance = t.at("variance").positive();
    } else {
        fail(n.child_path("kind"), "unknown action '" + a.kind + "' (affine, polynomial, link, binary_latent)");
    }
    return a;
}

// Signal generators: constant, per-agent draw, affine in covariates, or the
// agent's prior mean plus a draw.
struct SignalSpec {
    std::string kind = "constant";
    double value = 0.0;
    Dist dist;
    double intercept = 0.0;
    std::vector<std::pair<std::size_t, double>> slopes;
};

SignalSpec parse_signal(const Node& n, const std::vector<std::string>& covariates) {
    SignalSpec s;
    if (n.is_number()) {
        s.value = n.number();
        return s;
    }
    s.kind = n.at("kind").str();
    if (s.kind == "constant") {
        n.only({"kind", "value"});
        s.value = n.at("value").number();
    } else if (s.kind == "draw") {
        n.only({"kind", "dist"});
        s.dist = parse_dist(n.at("dist"));
    } else if (s.kind == "prior_shift") {
        n.only({"kind", "shift"});
        s.dist = parse_dist(n.at("shift"));
    } else if (s.kind == "covariate_affine") {
        n.only({"kind", "intercept", "coefficients"});
        s.intercept = n.has("intercept") ? n.at("intercept").number() : 0.0;
        const Node c = n.at("coefficients");
        c.expect_object();
        for (const auto& [name, value] : c.raw().items()) {
            const auto it = std::find(covariates.begin(), covariates.end(), name);
            if (it == covariates.end()) fail(c.child_path(name), "unknown covariate");
            s.slopes.emplace_back(static_cast<std::size_t>(it - covariates.begin()), Node(value, c.child_path(name)).number());
        }
    } else {
        fail(n.child_path("kind"), "unknown signal kind '" + s.kind + "' (constant, draw, prior_shift, covariate_affine)");
    }
    return s;
}

SignalFn build_signal(const SignalSpec& spec, std::uint64_t seed, std::size_t count, std::uint64_t arm) {
    if (spec.kind == "constant") {
        const double v = spec.value;
        return [v](const Agent&) { return v; };
    }
    if (spec.kind == "covariate_affine") {
        return [spec](const Agent& a) {
            double s = spec.intercept;
            for (const auto& [k, b] : spec.slopes) s += b * a.covariates.at(k);
            return s;
        };
    }
    auto draws = std::make_shared<std::vector<double>>(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(seed, Stream::Signals, 3 * static_cast<std::uint64_t>(i) + arm);
        (*draws)[i] = spec.dist.draw(rng);
    }
    const bool shift = spec.kind == "prior_shift";
    return [draws, shift](const Agent& a) {
        const auto idx = static_cast<std::size_t>(a.id - 1);
        const double d = draws->at(idx);
        return shift ? feature_value(a.prior, Feature::mean()) + d : d;
    };
}

std::string default_spec_name(const SpecEntry& e) {
    std::string name(to_string(e.request.kind));
    if (e.request.kind == SpecKind::Passive) name += "-" + std::string(to_string(e.request.interaction));
    if (e.request.kind == SpecKind::Conditional) {
        std::string c = e.correction;
        std::replace(c.begin(), c.end(), ':', '-');
        name += "-" + c;
    }
    if (e.request.gap_normalization == GapNormalization::PercentOfSignal) name += "-pct";
    if (e.request.elasticity_power) name += "-log" + std::to_string(*e.request.elasticity_power);
    return name;
}

std::vector<SpecEntry> parse_specs(const Node& n, DesignKind kind, const std::vector<std::string>& covariates) {
    std::vector<SpecEntry> out;
    std::set<std::string> names;
    for (std::size_t i = 0; i < n.size(); ++i) {
        const Node s = n.at(i);
        s.only({"name", "spec", "interaction", "controls", "normalize_gap", "elasticity", "correction", "strict_one_prior"});
        SpecEntry e;
        try {
            e.request.kind = parse_spec(s.at("spec").str());
        } catch (const Error& err) {
            fail(s.child_path("spec"), err.what());
        }
        if (e.request.kind == SpecKind::Passive && kind != DesignKind::Passive) fail(s.child_path("spec"), "passive spec on an active design");
        if (e.request.kind == SpecKind::Active && kind != DesignKind::Active) fail(s.child_path("spec"), "active spec on a passive design");
        if (s.has("interaction")) {
            if (e.request.kind != SpecKind::Passive) fail(s.child_path("interaction"), "only passive specs take an interaction");
            try {
                e.request.interaction = parse_interaction(s.at("interaction").str());
            } catch (const Error& err) {
                fail(s.child_path("interaction"), err.what());
            }
        }
        if (s.has("controls")) {
            e.request.controls = s.at("controls").strings();
            for (const auto& c : e.request.controls)
                if (std::find(covariates.begin(), covariates.end(), c) == covariates.end()) fail(s.child_path("controls"), "unknown covariate '" + c + "'");
        }
        if (s.has("normalize_gap") && s.at("normalize_gap").boolean()) e.request.gap_normalization = GapNormalization::PercentOfSignal;
        if (s.has("elasticity")) {
            const auto p = s.at("elasticity").uint64();
            if (p < 1) fail(s.child_path("elasticity"), "must be a positive integer");
            e.request.elasticity_power = static_cast<int>(p);
        }
        if (s.has("strict_one_prior")) e.request.strict_one_prior = s.at("strict_one_prior").boolean();
        if (e.request.kind == SpecKind::Conditional) {
            e.correction = s.at("correction").str();
            e.request.correction_name = e.correction;
        } else if (s.has("correction")) {
            fail(s.child_path("correction"), "only conditional specs take a correction");
        }
        e.name = s.has("name") ? s.at("name").str() : default_spec_name(e);
        if (e.name.empty() || e.name.find_first_of("/\\ ") != std::string::npos) fail(s.child_path("name"), "invalid artifact name");
        if (!names.insert(e.name).second) fail(s.path(), "duplicate spec name '" + e.name + "'");
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

RunConfig parse_config(const json& document) {
    RunConfig cfg;
    cfg.document = document;
    const Node root(document, "");
    root.only({"seed", "output_dir", "feature", "tolerances", "population", "design", "specs", "diagnostics"});
    cfg.seed = root.at("seed").uint64();
    if (root.has("output_dir")) cfg.output_dir = root.at("output_dir").str();

    if (root.has("tolerances")) {
        const Node t = root.at("tolerances");
        t.only({"probability", "algebraic", "family_normalization", "feature_equality"});
        if (t.has("probability")) cfg.tolerances.probability = t.at("probability").positive();
        if (t.has("algebraic")) cfg.tolerances.algebraic = t.at("algebraic").positive();
        if (t.has("family_normalization")) cfg.tolerances.family_normalization = t.at("family_normalization").positive();
        if (t.has("feature_equality")) cfg.tolerances.feature_equality = t.at("feature_equality").positive();
    }

    // Design first: it decides which groups the population must configure.
    const Node design = root.at("design");
    design.only({"kind", "assignment_prob", "signal", "low", "high"});
    const std::string design_kind = design.at("kind").str();
    if (design_kind != "passive" && design_kind != "active") fail(design.child_path("kind"), "expected 'passive' or 'active'");
    const DesignKind kind = design_kind == "passive" ? DesignKind::Passive : DesignKind::Active;
    cfg.design.assignment_prob = design.has("assignment_prob") ? design.at("assignment_prob").number() : 0.5;
    if (!(cfg.design.assignment_prob > 0.0 && cfg.design.assignment_prob < 1.0)) {
        fail(design.child_path("assignment_prob"), "must lie strictly between 0 and 1");
    }
    cfg.design.seed = cfg.seed;

    const Node pop = root.at("population");
    pop.only({"count", "belief_model", "prior", "grid", "covariates", "action", "groups"});
    const auto count = static_cast<std::size_t>(pop.at("count").uint64());
    if (count == 0) fail(pop.child_path("count"), "must be at least 1");
    const std::string model = pop.has("belief_model") ? pop.at("belief_model").str() : "gaussian";
    if (model != "gaussian" && model != "grid") fail(pop.child_path("belief_model"), "expected 'gaussian' or 'grid'");
    const bool grid_model = model == "grid";
    std::optional<GridSpec> grid;
    if (grid_model) grid = parse_grid(pop.at("grid"));
    else if (pop.has("grid")) fail(pop.child_path("grid"), "only used with belief_model 'grid'");

    cfg.feature = root.has("feature") ? parse_feature(root.at("feature"), grid) : Feature::mean();

    const Node prior = pop.at("prior");
    prior.only({"mean", "variance"});
    const Dist prior_mean = parse_dist(prior.at("mean"));
    const Dist prior_var = parse_dist(prior.at("variance"));

    std::vector<Dist> cov_dists;
    if (pop.has("covariates")) {
        const Node covs = pop.at("covariates");
        for (std::size_t i = 0; i < covs.size(); ++i) {
            const Node c = covs.at(i);
            c.only({"name", "dist"});
            const std::string name = c.at("name").str();
            if (!is_covariate_name(name)) fail(c.child_path("name"), "covariate names start with 'x' (letters, digits, _)");
            if (std::find(cfg.covariate_names.begin(), cfg.covariate_names.end(), name) != cfg.covariate_names.end()) {
                fail(c.child_path("name"), "duplicate covariate '" + name + "'");
            }
            cfg.covariate_names.push_back(name);
            cov_dists.push_back(parse_dist(c.at("dist")));
        }
    }

    const ActionSpec action = parse_action(pop.at("action"));

    const Node groups = pop.at("groups");
    groups.expect_object();
    const Group base = base_group(kind), alt = alt_group(kind);
    for (const auto& [key, value] : groups.raw().items()) {
        if (key != to_string(base) && key != to_string(alt)) {
            fail(groups.child_path(key), "group is not part of a " + design_kind + " design");
        }
    }
    std::map<Group, GroupSpec> group_specs;
    for (Group g : {base, alt}) {
        const Node gn = groups.at(std::string(to_string(g)));
        gn.only({"rule", "perceived_noise", "signal_grid", "snap"});
        GroupSpec gs;
        gs.path = gn.path();
        gs.key = gn.raw().dump();
        gs.rule = parse_rule(gn.at("rule"), grid_model);
        const bool uses_signal = gs.rule.kind == "bayesian" || gs.rule.kind == "anchored" || gs.rule.kind == "grether";
        if (gn.has("perceived_noise")) gs.noise = parse_dist(gn.at("perceived_noise"));
        else if (uses_signal) fail(gn.child_path("perceived_noise"), "required field missing");
        else gs.noise.a = 1.0;
        if (grid_model && !gs.noise.constant()) fail(gn.child_path("perceived_noise"), "must be a constant for grid agents");
        if (grid_model && uses_signal && !(gs.noise.a > 0.0)) fail(gn.child_path("perceived_noise"), "must be positive");
        if (gn.has("signal_grid")) {
            if (!grid_model) fail(gn.child_path("signal_grid"), "only used with belief_model 'grid'");
            gs.signal_grid = parse_grid(gn.at("signal_grid"));
        }
        if (gn.has("snap")) {
            const std::string snap = gn.at("snap").str();
            if (snap == "strict") gs.snap = SnapMode::Strict;
            else if (snap != "nearest") fail(gn.child_path("snap"), "expected 'nearest' or 'strict'");
        }
        group_specs.emplace(g, std::move(gs));
    }

    // Signals.
    if (kind == DesignKind::Passive) {
        if (design.has("low") || design.has("high")) fail(design.path(), "passive designs take 'signal', not 'low'/'high'");
        const auto spec = parse_signal(design.at("signal"), cfg.covariate_names);
        cfg.design.arms = PassiveDesign{build_signal(spec, cfg.seed, count, 0)};
    } else {
        if (design.has("signal")) fail(design.child_path("signal"), "active designs take 'low' and 'high'");
        const auto low = parse_signal(design.at("low"), cfg.covariate_names);
        const auto high = parse_signal(design.at("high"), cfg.covariate_names);
        cfg.design.arms = ActiveDesign{build_signal(low, cfg.seed, count, 1), build_signal(high, cfg.seed, count, 2)};
    }

    // Shared grid objects.
    StateGrid state_grid;
    std::map<Group, std::shared_ptr<const SignalFamily>> families;
    std::optional<GridBelief> thresholds;
    try {
        if (grid_model) {
            state_grid = make_grid(linspace(grid->lo, grid->hi, grid->points));
            for (const auto& [g, gs] : group_specs) {
                if (gs.rule.kind == "none" || gs.rule.kind == "drift") continue;
                const GridSpec sg = gs.signal_grid.value_or(*grid);
                families[g] = std::make_shared<const SignalFamily>(
                    SignalFamily::gaussian_location(linspace(sg.lo, sg.hi, sg.points), state_grid, gs.noise.a));
            }
        }
        if (action.kind == "binary_latent") {
            thresholds = GridBelief::discretized_normal(
                make_grid(linspace(action.thresholds.lo, action.thresholds.hi, action.thresholds.points)),
                action.threshold_mean, action.threshold_variance);
        }
    } catch (const Error& e) {
        fail(pop.path(), e.what());
    }

    cfg.population.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Agent agent;
        agent.id = static_cast<std::int64_t>(i + 1);
        Rng rng(cfg.seed, Stream::Population, i);
        Rng cov_rng(cfg.seed, Stream::Covariates, i);
        const double mean = prior_mean.draw(rng);
        const double var = prior_var.draw(rng);
        if (!(var > 0.0)) {
            throw Error(ErrorCode::Validation, kModule, "population.prior.variance: agent " + std::to_string(agent.id) +
                                                            " drew a nonpositive variance");
        }
        if (grid_model) agent.prior = GridBelief::discretized_normal(state_grid, mean, var);
        else agent.prior = GaussianBelief(mean, var);

        for (const auto& d : cov_dists) agent.covariates.push_back(d.draw(cov_rng));

        if (action.kind == "affine") {
            const double t0 = action.theta0.draw(rng);
            const double t1 = action.theta1.draw(rng);
            agent.action = AffineAction{t0, t1};
        } else if (action.kind == "polynomial") {
            agent.action = PolynomialAction{action.coefficients};
        } else if (action.kind == "link") {
            agent.action = action.link;
        } else {
            agent.action = BinaryLatentAction{*thresholds};
        }

        for (const auto& [g, gs] : group_specs) {
            // The updating type is an agent trait: arms configured identically
            // get the same rule parameters and perceived noise.
            const auto same = std::find_if(agent.groups.begin(), agent.groups.end(),
                                           [&](const auto& kv) { return group_specs.at(kv.first).key == gs.key; });
            if (same != agent.groups.end()) {
                agent.groups.emplace(g, same->second);
                continue;
            }
            GroupModel m;
            m.snap = gs.snap;
            const auto& r = gs.rule;
            if (r.kind == "none") {
                m.rule = NoUpdate{};
            } else if (r.kind == "bayesian") {
                m.rule = Bayesian{};
            } else if (r.kind == "anchored") {
                const double tau = r.tau.draw(rng);
                GridBelief anchor = r.anchor ? GridBelief::discretized_normal(state_grid, r.anchor->first, r.anchor->second)
                                             : std::get<GridBelief>(agent.prior);
                m.rule = Anchored{tau, std::move(anchor)};
            } else if (r.kind == "grether") {
                const double chi0 = r.chi0.draw(rng);
                const double chi1 = r.chi1.draw(rng);
                m.rule = Grether{chi0, chi1};
            } else {
                m.rule = Drift{r.shift.draw(rng)};
            }
            try {
                validate_rule(m.rule);
            } catch (const Error& e) {
                throw Error(ErrorCode::Validation, kModule, gs.path + ".rule: agent " + std::to_string(agent.id) + ": " + e.what());
            }
            m.perceived_noise = gs.noise.draw(rng);
            if (!grid_model && !(m.perceived_noise > 0.0)) {
                throw Error(ErrorCode::Validation, kModule, gs.path + ".perceived_noise: agent " +
                                                                std::to_string(agent.id) + " drew a nonpositive value");
            }
            const auto fam = families.find(g);
            if (fam != families.end()) m.family = fam->second;
            agent.groups.emplace(g, std::move(m));
        }
        cfg.population.push_back(std::move(agent));
    }

    if (root.has("specs")) {
        cfg.specs = parse_specs(root.at("specs"), kind, cfg.covariate_names);
    } else {
        json defaults = json::array();
        if (kind == DesignKind::Passive) {
            for (const char* k : {"sign", "gap", "one-gap", "one-prior"}) defaults.push_back({{"spec", "passive"}, {"interaction", k}});
        } else {
            defaults.push_back({{"spec", "active"}});
        }
        cfg.specs = parse_specs(Node(defaults, "specs"), kind, cfg.covariate_names);
    }

    if (root.has("diagnostics")) {
        const Node d = root.at("diagnostics");
        d.only({"bins", "emit_plot_data", "statistic", "method", "condition_sample"});
        if (d.has("bins")) {
            cfg.diagnostics.bins = static_cast<std::size_t>(d.at("bins").uint64());
            if (cfg.diagnostics.bins == 0) fail(d.child_path("bins"), "must be at least 1");
        }
        if (d.has("emit_plot_data")) cfg.diagnostics.emit_plot_data = d.at("emit_plot_data").boolean();
        if (d.has("statistic")) cfg.diagnostics.statistic = d.at("statistic").str();
        if (d.has("method")) {
            const std::string m = d.at("method").str();
            if (m == "group-difference") cfg.diagnostics.method = BinMethod::GroupDifference;
            else if (m != "residualized") fail(d.child_path("method"), "expected 'residualized' or 'group-difference'");
        }
        if (d.has("condition_sample")) cfg.diagnostics.condition_sample = static_cast<std::size_t>(d.at("condition_sample").uint64());
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    const std::string text = read_file(path);
    json document;
    try {
        document = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Schema, kModule, path + ": invalid JSON: " + e.what());
    }
    return parse_config(document);
}

}  // namespace ipe
