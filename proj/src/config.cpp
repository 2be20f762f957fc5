#include "mfgcap/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mfgcap/errors.hpp"

namespace mfgcap {

using nlohmann::json;

namespace {

/// Reads the keys of one JSON object and rejects any it was not asked about.
class Section {
public:
    Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) throw ConfigError(path_, "must be an object");
    }

    bool has(const std::string& key) const { return doc_.contains(key); }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        const json* v = find(key, fallback.has_value());
        if (!v) return *fallback;
        if (!v->is_number()) throw ConfigError(name(key), "must be a number");
        return v->get<double>();
    }

    std::size_t count(const std::string& key, std::optional<std::size_t> fallback = std::nullopt) {
        const json* v = find(key, fallback.has_value());
        if (!v) return *fallback;
        if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
            throw ConfigError(name(key), "must be a non-negative integer");
        return v->get<std::size_t>();
    }

    std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
        const json* v = find(key, true);
        if (!v) return fallback;
        if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
            throw ConfigError(name(key), "must be a non-negative integer");
        return v->get<std::uint64_t>();
    }

    bool flag(const std::string& key, bool fallback) {
        const json* v = find(key, true);
        if (!v) return fallback;
        if (!v->is_boolean()) throw ConfigError(name(key), "must be true or false");
        return v->get<bool>();
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        const json* v = find(key, fallback.has_value());
        if (!v) return *fallback;
        if (!v->is_string()) throw ConfigError(name(key), "must be a string");
        return v->get<std::string>();
    }

    const json& raw(const std::string& key) {
        const json* v = find(key, false);
        return *v;
    }

    Section child(const std::string& key) { return Section(raw(key), name(key)); }

    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    /// Throws for the first key never read.
    void finish() const {
        for (auto it = doc_.begin(); it != doc_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(name(it.key()), "unknown key");
    }

private:
    const json* find(const std::string& key, bool optional) {
        seen_.insert(key);
        if (!doc_.contains(key)) {
            if (optional) return nullptr;
            throw ConfigError(name(key), "missing");
        }
        return &doc_.at(key);
    }

    const json& doc_;
    std::string path_;
    std::set<std::string> seen_;
};

PriceModel parse_price(Section s) {
    const std::string type = s.text("type");
    PriceModel pm;
    if (type == "marginal_capacity") {
        pm = MarginalCapacityPrice{s.number("M"), s.number("p0"), s.number("p1"), s.number("r"), s.number("D")};
    } else if (type == "capacity") {
        pm = CapacityPrice{s.number("p0"), s.number("p1"), s.number("r"), s.number("eps1"), s.number("eps2")};
    } else if (type == "constant") {
        pm = ConstantPrice{s.number("M")};
    } else {
        throw ConfigError("price.type", "expected marginal_capacity, capacity or constant, got '" + type + "'");
    }
    s.finish();
    return pm;
}

DemandSpec parse_demand(Section s) {
    const std::string type = s.text("type");
    DemandSpec d;
    if (type == "constant") {
        d = ConstantDemand{s.number("D")};
    } else if (type == "mean_reverting") {
        d = MeanRevertingDemand{s.number("a"), s.number("b0"), s.number("b1"), s.number("b2"), s.number("D0")};
    } else {
        throw ConfigError("demand.type", "expected constant or mean_reverting, got '" + type + "'");
    }
    s.finish();
    validate_demand(d);
    return d;
}

TrainingConfig parse_training(Section s) {
    TrainingConfig t;
    t.batch = s.count("batch", t.batch);
    t.iterations = s.count("iterations", t.iterations);
    t.schedule.initial = s.number("lr", t.schedule.initial);
    if (s.has("lr_milestones")) {
        const json& ms = s.raw("lr_milestones");
        if (!ms.is_array()) throw ConfigError("training.lr_milestones", "must be an array of [fraction, lr] pairs");
        t.schedule.milestones.clear();
        for (const auto& m : ms) {
            if (!m.is_array() || m.size() != 2 || !m[0].is_number() || !m[1].is_number())
                throw ConfigError("training.lr_milestones", "each entry must be [fraction, lr]");
            t.schedule.milestones.push_back({m[0].get<double>(), m[1].get<double>()});
        }
    }
    t.initial_lr_scale = s.number("initial_lr_scale", t.initial_lr_scale);
    if (s.has("hidden")) {
        const json& h = s.raw("hidden");
        if (!h.is_array() || h.empty()) throw ConfigError("training.hidden", "must be a non-empty array of widths");
        t.arch.hidden_widths.clear();
        for (const auto& w : h) {
            if (!w.is_number_integer() || w.get<long long>() <= 0)
                throw ConfigError("training.hidden", "widths must be positive integers");
            t.arch.hidden_widths.push_back(w.get<std::size_t>());
        }
    }
    t.full_initial_network = s.flag("full_initial_network", t.full_initial_network);
    const std::string opt = s.text("optimizer", "adam");
    if (opt == "adam") t.optimizer.mode = OptimizerMode::adam;
    else if (opt == "sgd") t.optimizer.mode = OptimizerMode::plain;
    else throw ConfigError("training.optimizer", "expected adam or sgd");
    t.eval_multiplier = s.count("eval_multiplier", t.eval_multiplier);
    t.chunk_size = s.count("chunk_size", t.chunk_size);
    const std::string drift = s.text("drift", "optimal_control");
    if (drift == "optimal_control") t.drift = DriftVariant::optimal_control;
    else if (drift == "pseudocode") t.drift = DriftVariant::pseudocode;
    else throw ConfigError("training.drift", "expected optimal_control or pseudocode");
    const std::string formula = s.text("subsidy_formula", "divided");
    if (formula == "divided") t.subsidy_formula = SubsidyFormula::divided;
    else if (formula == "undivided") t.subsidy_formula = SubsidyFormula::undivided;
    else throw ConfigError("training.subsidy_formula", "expected divided or undivided");
    s.finish();
    t.validate();
    return t;
}

json price_json(const PriceModel& pm) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, MarginalCapacityPrice>)
                return {{"type", "marginal_capacity"}, {"M", p.cap}, {"p0", p.p0}, {"p1", p.p1}, {"r", p.r},
                        {"D", p.demand}};
            else if constexpr (std::is_same_v<T, CapacityPrice>)
                return {{"type", "capacity"}, {"p0", p.p0}, {"p1", p.p1}, {"r", p.r}, {"eps1", p.eps1},
                        {"eps2", p.eps2}};
            else
                return {{"type", "constant"}, {"M", p.value}};
        },
        pm);
}

json demand_json(const DemandSpec& d) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ConstantDemand>)
                return {{"type", "constant"}, {"D", p.level}};
            else
                return {{"type", "mean_reverting"}, {"a", p.a}, {"b0", p.b0}, {"b1", p.b1}, {"b2", p.b2},
                        {"D0", p.initial}};
        },
        d);
}

}  // namespace

RunConfig parse_config(const json& doc) {
    Section root(doc, "");
    RunConfig c;
    c.description = root.text("description", "");

    if (root.has("market")) {
        Section m = root.child("market");
        c.market.delta = m.number("delta", c.market.delta);
        c.market.sigma = m.number("sigma", c.market.sigma);
        c.market.sigma0 = m.number("sigma0", c.market.sigma0);
        c.market.c_p = m.number("c_p", c.market.c_p);
        c.market.c_i = m.number("c_i", c.market.c_i);
        c.market.c_a = m.number("c_a", c.market.c_a);
        m.finish();
    }
    c.market.price = parse_price(root.child("price"));

    Section g = root.child("grid");
    c.grid.horizon = g.number("T");
    c.grid.steps = g.count("N");
    g.finish();

    Section init = root.child("initial");
    c.mu0 = init.number("mu0");
    init.finish();

    if (root.has("demand")) c.demand = parse_demand(root.child("demand"));
    if (root.has("planner")) {
        Section p = root.child("planner");
        c.planner = PlannerParams{p.number("lambda_d"), p.number("S")};
        p.finish();
        c.planner->validate();
    }
    if (root.has("training")) c.training = parse_training(root.child("training"));
    if (root.has("seeds")) {
        Section s = root.child("seeds");
        c.training.seed = s.u64("seed", c.training.seed);
        s.finish();
    }
    root.finish();

    c.market.validate();
    c.grid.validate();
    if (!std::isfinite(c.mu0)) throw ConfigError("initial.mu0", "must be finite");
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("", "cannot read config file " + path.string());
    std::stringstream buf;
    buf << is.rdbuf();
    json doc;
    try {
        doc = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ConfigError("", "malformed JSON in " + path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

json to_json(const RunConfig& c) {
    json doc;
    doc["description"] = c.description;
    doc["market"] = {{"delta", c.market.delta}, {"sigma", c.market.sigma}, {"sigma0", c.market.sigma0},
                     {"c_p", c.market.c_p},     {"c_i", c.market.c_i},     {"c_a", c.market.c_a}};
    doc["price"] = price_json(c.market.price);
    doc["grid"] = {{"T", c.grid.horizon}, {"N", c.grid.steps}};
    doc["initial"] = {{"mu0", c.mu0}};
    if (c.demand) doc["demand"] = demand_json(*c.demand);
    if (c.planner) doc["planner"] = {{"lambda_d", c.planner->lambda_d}, {"S", c.planner->subsidy_bound}};
    const TrainingConfig& t = c.training;
    json milestones = json::array();
    for (const auto& m : t.schedule.milestones) milestones.push_back({m.fraction, m.lr});
    doc["training"] = {
        {"batch", t.batch},
        {"iterations", t.iterations},
        {"lr", t.schedule.initial},
        {"lr_milestones", milestones},
        {"initial_lr_scale", t.initial_lr_scale},
        {"hidden", t.arch.hidden_widths},
        {"full_initial_network", t.full_initial_network},
        {"optimizer", t.optimizer.mode == OptimizerMode::adam ? "adam" : "sgd"},
        {"eval_multiplier", t.eval_multiplier},
        {"chunk_size", t.chunk_size},
        {"drift", t.drift == DriftVariant::optimal_control ? "optimal_control" : "pseudocode"},
        {"subsidy_formula", t.subsidy_formula == SubsidyFormula::divided ? "divided" : "undivided"},
    };
    doc["seeds"] = {{"seed", t.seed}};
    return doc;
}

MfgScenario mfg_scenario(const RunConfig& c) {
    MfgScenario s;
    s.market = c.market;
    s.grid = c.grid;
    s.mu0 = c.mu0;
    s.validate();
    return s;
}

StackelbergScenario stackelberg_scenario(const RunConfig& c) {
    if (!c.planner) throw ConfigError("planner", "section required for the planner solver");
    if (!c.demand) throw ConfigError("demand", "section required for the planner solver");
    StackelbergScenario s;
    s.market = c.market;
    s.grid = c.grid;
    s.mu0 = c.mu0;
    s.demand = *c.demand;
    s.planner = *c.planner;
    s.validate();
    return s;
}

}  // namespace mfgcap
