#include "tiemb/config.hpp"

#include <toml.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace tiemb {

namespace {

std::string locate(const std::string& file, const toml::source_region& src) {
    std::ostringstream os;
    os << file;
    if (src.begin.line > 0) os << ":" << src.begin.line << ":" << src.begin.column;
    return os.str();
}

/// Typed access to one TOML table with file:line diagnostics.
class Section {
public:
    Section(const toml::table& table, std::string name, std::string file)
        : table_(table), name_(std::move(name)), file_(std::move(file)) {}

    void allow_only(std::initializer_list<std::string_view> keys) const {
        const std::set<std::string_view> allowed(keys);
        for (const auto& [key, node] : table_) {
            if (!allowed.count(key.str())) {
                fail(node, "unknown key '" + std::string(key.str()) + "' in [" + name_ + "]");
            }
        }
    }

    [[nodiscard]] bool has(std::string_view key) const { return table_.contains(key); }

    [[nodiscard]] double real(std::string_view key, double fallback) const {
        const toml::node* n = table_.get(key);
        if (!n) return fallback;
        if (auto v = n->as_floating_point()) return v->get();
        if (auto v = n->as_integer()) return static_cast<double>(v->get());
        fail(*n, "'" + std::string(key) + "' must be a number");
    }

    [[nodiscard]] std::int64_t integer(std::string_view key, std::int64_t fallback) const {
        const toml::node* n = table_.get(key);
        if (!n) return fallback;
        if (auto v = n->as_integer()) return v->get();
        fail(*n, "'" + std::string(key) + "' must be an integer");
    }

    [[nodiscard]] std::string text(std::string_view key, const std::string& fallback) const {
        const toml::node* n = table_.get(key);
        if (!n) return fallback;
        if (auto v = n->as_string()) return v->get();
        fail(*n, "'" + std::string(key) + "' must be a string");
    }

    [[nodiscard]] std::vector<double> reals(std::string_view key) const {
        const toml::node* n = table_.get(key);
        const toml::array* arr = n ? n->as_array() : nullptr;
        if (!arr) fail(n, "'" + std::string(key) + "' must be an array of numbers");
        std::vector<double> out;
        for (const auto& el : *arr) {
            if (auto v = el.as_floating_point()) {
                out.push_back(v->get());
            } else if (auto w = el.as_integer()) {
                out.push_back(static_cast<double>(w->get()));
            } else {
                fail(el, "'" + std::string(key) + "' must contain only numbers");
            }
        }
        return out;
    }

    [[nodiscard]] std::vector<std::int64_t> integers(std::string_view key) const {
        const toml::node* n = table_.get(key);
        const toml::array* arr = n ? n->as_array() : nullptr;
        if (!arr) fail(n, "'" + std::string(key) + "' must be an array of integers");
        std::vector<std::int64_t> out;
        for (const auto& el : *arr) {
            auto v = el.as_integer();
            if (!v) fail(el, "'" + std::string(key) + "' must contain only integers");
            out.push_back(v->get());
        }
        return out;
    }

    [[nodiscard]] std::vector<std::string> strings(std::string_view key) const {
        const toml::node* n = table_.get(key);
        const toml::array* arr = n ? n->as_array() : nullptr;
        if (!arr) fail(n, "'" + std::string(key) + "' must be an array of strings");
        std::vector<std::string> out;
        for (const auto& el : *arr) {
            auto v = el.as_string();
            if (!v) fail(el, "'" + std::string(key) + "' must contain only strings");
            out.push_back(v->get());
        }
        return out;
    }

    [[noreturn]] void fail(const toml::node* n, const std::string& what) const {
        throw ConfigError(locate(file_, n ? n->source() : table_.source()) + ": " + what);
    }
    [[noreturn]] void fail(const toml::node& n, const std::string& what) const { fail(&n, what); }
    [[noreturn]] void fail(const std::string& what) const { fail(nullptr, what); }

    [[nodiscard]] const toml::table& table() const { return table_; }
    [[nodiscard]] const std::string& file() const { return file_; }

private:
    const toml::table& table_;
    std::string name_;
    std::string file_;
};

const toml::table* subtable(const Section& parent, std::string_view key) {
    const toml::node* n = parent.table().get(key);
    if (!n) return nullptr;
    const toml::table* t = n->as_table();
    if (!t) parent.fail(n, "'" + std::string(key) + "' must be a table");
    return t;
}

void read_run(const Section& s, RunConfig& cfg) {
    s.allow_only({"mode", "runs", "seed", "workers", "filters", "lscan"});
    if (s.has("mode")) {
        try {
            cfg.mode = parse_mode(s.text("mode", "alive"));
        } catch (const std::invalid_argument& e) {
            s.fail(s.table().get("mode"), e.what());
        }
    }
    cfg.runs = static_cast<int>(s.integer("runs", cfg.runs));
    const std::int64_t seed = s.integer("seed", static_cast<std::int64_t>(cfg.seed));
    if (seed < 0) s.fail(s.table().get("seed"), "'seed' must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.workers = static_cast<int>(s.integer("workers", cfg.workers));
    if (s.has("filters")) cfg.filters = s.strings("filters");
    if (s.has("lscan")) {
        cfg.lscans.clear();
        for (const auto v : s.integers("lscan")) cfg.lscans.push_back(static_cast<int>(v));
    }
}

void read_filter(const Section& s, FilterConfig& f) {
    s.allow_only({"gamma_d", "gamma_a", "iplf_max_iters", "iplf_kld_threshold", "central_weight"});
    f.gamma_d = s.real("gamma_d", f.gamma_d);
    f.gamma_a = s.real("gamma_a", f.gamma_a);
    f.iplf_max_iters = static_cast<int>(s.integer("iplf_max_iters", f.iplf_max_iters));
    f.iplf_kld_threshold = s.real("iplf_kld_threshold", f.iplf_kld_threshold);
    f.sigma_central_weight = s.real("central_weight", f.sigma_central_weight);
}

Vec to_vec(const std::vector<double>& v) {
    return Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size()));
}

void read_scenario(const Section& s, Scenario& sc) {
    s.allow_only({"duration", "area", "cell_width", "period", "sigma_q", "p_survival", "init_extent", "init_speed",
                  "rician", "birth", "targets"});
    sc.duration = static_cast<int>(s.integer("duration", sc.duration));
    if (s.has("area")) {
        const auto area = s.reals("area");
        if (area.size() != 2) s.fail(s.table().get("area"), "'area' must be [x_extent, y_extent]");
        sc.area_x = area[0];
        sc.area_y = area[1];
    }
    sc.cell_width = s.real("cell_width", sc.cell_width);
    sc.period = s.real("period", sc.period);
    sc.sigma_q = s.real("sigma_q", sc.sigma_q);
    sc.p_survival = s.real("p_survival", sc.p_survival);
    sc.init_extent = s.real("init_extent", sc.init_extent);
    sc.init_speed = s.real("init_speed", sc.init_speed);

    if (const toml::table* t = subtable(s, "rician")) {
        const Section r(*t, "scenario.rician", s.file());
        r.allow_only({"sigma_r", "phi", "sigma_x", "sigma_y"});
        sc.rician.sigma_r = r.real("sigma_r", sc.rician.sigma_r);
        sc.rician.phi = r.real("phi", sc.rician.phi);
        sc.rician.sigma_x = r.real("sigma_x", sc.rician.sigma_x);
        sc.rician.sigma_y = r.real("sigma_y", sc.rician.sigma_y);
    }

    auto array_of_tables = [&](std::string_view key) -> const toml::array* {
        const toml::node* n = s.table().get(key);
        if (!n) return nullptr;
        const toml::array* arr = n->as_array();
        if (!arr || !arr->is_array_of_tables()) s.fail(n, "'" + std::string(key) + "' must be an array of tables");
        return arr;
    };

    if (const toml::array* births = array_of_tables("birth")) {
        sc.birth.clear();
        for (const auto& el : *births) {
            const Section b(*el.as_table(), "scenario.birth", s.file());
            b.allow_only({"p_b", "mean", "cov_diag"});
            const auto mean = b.reals("mean");
            const auto var = b.reals("cov_diag");
            if (mean.size() != 4 || var.size() != 4) b.fail("birth 'mean' and 'cov_diag' must have 4 entries");
            sc.birth.push_back({b.real("p_b", 1e-6), GaussianDensity(to_vec(mean), to_vec(var).asDiagonal())});
        }
    }

    if (const toml::array* targets = array_of_tables("targets")) {
        sc.targets.clear();
        for (const auto& el : *targets) {
            const Section t(*el.as_table(), "scenario.targets", s.file());
            t.allow_only({"birth", "death", "initial"});
            if (!t.has("birth") || !t.has("death")) t.fail("each target needs 'birth' and 'death'");
            TargetSpec spec;
            spec.birth = static_cast<int>(t.integer("birth", 1));
            spec.death = static_cast<int>(t.integer("death", 2));
            if (t.has("initial")) {
                const auto init = t.reals("initial");
                if (init.size() != 4) t.fail(t.table().get("initial"), "'initial' must be [px, vx, py, vy]");
                spec.initial = to_vec(init);
            }
            sc.targets.push_back(std::move(spec));
        }
    }
}

void read_metric(const Section& s, MetricConfig& m) {
    s.allow_only({"p", "c", "gamma"});
    m.p = s.real("p", m.p);
    m.c = s.real("c", m.c);
    m.gamma = s.real("gamma", m.gamma);
}

}  // namespace

TrajectoryMode parse_mode(const std::string& text) {
    if (text == "alive") return TrajectoryMode::alive;
    if (text == "all") return TrajectoryMode::all;
    throw std::invalid_argument("mode must be 'alive' or 'all', got '" + text + "'");
}

std::vector<NamedFilter> RunConfig::named_filters() const {
    std::vector<NamedFilter> out;
    for (const auto& name : filters) {
        for (const int l : lscans) {
            FilterConfig base = filter;
            base.mode = mode;
            base.lscan = l;
            out.push_back({name, filter_from_name(name, base)});
        }
    }
    return out;
}

void RunConfig::validate() const {
    try {
        if (filters.empty()) throw std::invalid_argument("at least one filter is required");
        if (lscans.empty()) throw std::invalid_argument("at least one L-scan length is required");
        std::set<std::string> names;
        for (const auto& f : filters) {
            if (!names.insert(f).second) throw std::invalid_argument("filter '" + f + "' listed twice");
        }
        std::set<int> ls(lscans.begin(), lscans.end());
        if (ls.size() != lscans.size()) throw std::invalid_argument("L-scan lengths must be unique");
        if (runs < 1) throw std::invalid_argument("runs must be >= 1");
        if (workers < 0) throw std::invalid_argument("workers must be >= 0");
        scenario.validate();
        metric.validate();
        for (const auto& nf : named_filters()) nf.cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

RunConfig parse_config(const std::string& text, const std::string& source_name) {
    toml::table root;
    try {
        root = toml::parse(text, source_name);
    } catch (const toml::parse_error& e) {
        throw ConfigError(locate(source_name, e.source()) + ": " + std::string(e.description()));
    }

    RunConfig cfg;
    const Section top(root, "", source_name);
    top.allow_only({"run", "filter", "metric", "scenario"});
    bool metric_c_given = false;
    try {
        if (const toml::table* t = subtable(top, "run")) read_run(Section(*t, "run", source_name), cfg);
        if (const toml::table* t = subtable(top, "filter")) read_filter(Section(*t, "filter", source_name), cfg.filter);
        if (const toml::table* t = subtable(top, "scenario")) {
            read_scenario(Section(*t, "scenario", source_name), cfg.scenario);
        }
        if (const toml::table* t = subtable(top, "metric")) {
            const Section m(*t, "metric", source_name);
            read_metric(m, cfg.metric);
            metric_c_given = m.has("c");
        }
    } catch (const NumericalError& e) {
        throw ConfigError(source_name + ": " + e.what());
    }
    if (!metric_c_given) cfg.metric.c = cfg.scenario.cell_width;
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(source_name + ": " + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

void apply_overrides(RunConfig& cfg, const ConfigOverrides& o) {
    if (o.seed) cfg.seed = *o.seed;
    if (o.runs) cfg.runs = *o.runs;
    if (o.workers) cfg.workers = *o.workers;
    if (o.filters) cfg.filters = *o.filters;
    if (o.lscans) cfg.lscans = *o.lscans;
    if (o.mode) {
        try {
            cfg.mode = parse_mode(*o.mode);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("--mode: ") + e.what());
        }
    }
    cfg.validate();
}

}  // namespace tiemb
