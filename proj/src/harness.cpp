#include "bope/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace bope {

namespace {

// ---------------------------------------------------------------------------
// Small text utilities
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

bool parse_double_strict(const std::string& s, double* out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    if (t == "inf" || t == "+inf") {
        *out = std::numeric_limits<double>::infinity();
        return true;
    }
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) return false;
    *out = v;
    return true;
}

bool parse_i64_strict(const std::string& s, long long* out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size()) return false;
    *out = v;
    return true;
}

// ---------------------------------------------------------------------------
// Key-value file parsing shared by experiment and oracle configs
// ---------------------------------------------------------------------------

class KvReader {
  public:
    explicit KvReader(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
            if (!entries_.emplace(key, value).second)
                throw ConfigError("duplicate key '" + key + "'");
        }
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    std::optional<std::string> take(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        consumed_.insert(key);
        return it->second;
    }

    std::optional<double> take_double(const std::string& key) {
        auto v = take(key);
        if (!v) return std::nullopt;
        double d;
        if (!parse_double_strict(*v, &d)) throw ConfigError("key '" + key + "' is not a number");
        return d;
    }

    std::optional<long long> take_int(const std::string& key) {
        auto v = take(key);
        if (!v) return std::nullopt;
        long long d;
        if (!parse_i64_strict(*v, &d)) throw ConfigError("key '" + key + "' is not an integer");
        return d;
    }

    void finish() const {
        for (const auto& [key, value] : entries_) {
            if (!consumed_.count(key)) throw ConfigError("unknown key '" + key + "'");
        }
    }

  private:
    std::map<std::string, std::string> entries_;
    std::set<std::string> consumed_;
};

Vector parse_vector(const std::string& text, const std::string& key) {
    const auto parts = split(text, ',');
    Vector v(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) {
        double d;
        if (!parse_double_strict(parts[i], &d)) throw ConfigError("key '" + key + "': bad number");
        v[static_cast<Eigen::Index>(i)] = d;
    }
    return v;
}

Matrix parse_matrix(const std::string& text, const std::string& key) {
    const auto rows = split(text, '|');
    std::vector<Vector> parsed;
    for (const auto& r : rows) parsed.push_back(parse_vector(r, key));
    const Eigen::Index cols = parsed.front().size();
    Matrix m(static_cast<Eigen::Index>(parsed.size()), cols);
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        if (parsed[i].size() != cols) throw ConfigError("key '" + key + "': ragged rows");
        m.row(static_cast<Eigen::Index>(i)) = parsed[i].transpose();
    }
    return m;
}

void read_model_config(KvReader& kv, const std::string& prefix, ClassifierConfig* cfg) {
    if (auto fam = kv.take(prefix + ".family")) {
        if (*fam == "linear")
            cfg->family = ModelFamily::Linear;
        else if (*fam == "gbt")
            cfg->family = ModelFamily::Gbt;
        else
            throw ConfigError("key '" + prefix + ".family' must be linear or gbt");
    }
    if (auto v = kv.take_double(prefix + ".l2")) cfg->l2 = *v;
    if (auto v = kv.take_int(prefix + ".max_iters")) cfg->max_iters = static_cast<int>(*v);
    if (auto v = kv.take_double(prefix + ".tol")) cfg->tol = *v;
    if (auto r = kv.take(prefix + ".rounds")) {
        if (*r == "auto") {
            cfg->rounds = 0;
        } else {
            long long d;
            if (!parse_i64_strict(*r, &d) || d < 1)
                throw ConfigError("key '" + prefix + ".rounds' must be a positive integer or auto");
            cfg->rounds = static_cast<int>(d);
        }
    }
    if (auto v = kv.take_int(prefix + ".depth")) cfg->depth = static_cast<int>(*v);
    if (auto v = kv.take_double(prefix + ".learning_rate")) cfg->learning_rate = *v;
    if (auto v = kv.take_int(prefix + ".min_leaf")) cfg->min_leaf = static_cast<int>(*v);
    validate_config(*cfg);
}

std::string model_config_string(const ClassifierConfig& cfg) {
    char buf[160];
    if (cfg.family == ModelFamily::Linear) {
        std::snprintf(buf, sizeof(buf), "linear(l2=%.17g,max_iters=%d,tol=%.17g)", cfg.l2, cfg.max_iters,
                      cfg.tol);
    } else {
        std::snprintf(buf, sizeof(buf), "gbt(rounds=%d,depth=%d,learning_rate=%.17g,min_leaf=%d)",
                      cfg.rounds, cfg.depth, cfg.learning_rate, cfg.min_leaf);
    }
    return buf;
}

// ---------------------------------------------------------------------------
// Replication stream layout. Setup draws use salts below 100; replication r
// owns substream(base, 100 + r) and derives its own salts from it.
// ---------------------------------------------------------------------------

constexpr std::uint64_t kSaltSplit = 1;
constexpr std::uint64_t kSaltTargetFit = 2;
constexpr std::uint64_t kSaltSynth = 3;
constexpr std::uint64_t kSaltTruthMc = 4;
constexpr std::uint64_t kSaltRepBase = 100;

constexpr std::uint64_t kRepTestLog = 0;
constexpr std::uint64_t kRepTrainLog = 2;
constexpr std::uint64_t kRepBopeFit = 3;
constexpr std::uint64_t kRepPropensityFit = 4;
constexpr std::uint64_t kRepDmFit = 5;
constexpr std::uint64_t kRepProposed = 6;
constexpr std::uint64_t kRepBopeCrossfit = 7;

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min(threads, count);
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

double weight_quantile(const Vector& w, double q) {
    if (std::isinf(q)) return std::numeric_limits<double>::infinity();
    std::vector<double> sorted(w.data(), w.data() + w.size());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<long long>(sorted.size());
    long long idx = static_cast<long long>(std::ceil(q * static_cast<double>(n))) - 1;
    idx = std::max(0LL, std::min(n - 1, idx));
    return sorted[static_cast<std::size_t>(idx)];
}

// Per-replication evaluation outcome, filled independently per slot so the
// replication loop can run on any number of threads.
struct RepOutcome {
    std::vector<ReplicationRecord> records;
    std::optional<double> balance_ips, balance_bope;
    std::optional<double> ess_ips, ess_bope;
};

struct WeightBundle {
    std::optional<WeightVector> ips, bope;
    std::string ips_error, bope_error;
};

// Evaluates the selected estimators on one replication's data.
RepOutcome evaluate_replication(int rep, const ExperimentConfig& cfg, const LoggedDataset& logged,
                                const ProposedActions& proposed, const WeightBundle& weights,
                                const std::optional<RewardModel>& reward_model,
                                const std::string& reward_model_error, const RejectionSpec& rejection) {
    RepOutcome out;

    const FeatureMap fmap = FeatureMap::defaults(
        logged.kind, logged.kind == ActionKind::Discrete ? infer_num_actions(logged, proposed) : 0,
        logged.states.cols());
    if (weights.ips) {
        out.balance_ips = l1_discrepancy(logged, proposed, *weights.ips, fmap).discrepancy;
        out.ess_ips = weight_summary(*weights.ips).effective_sample_size;
    }
    if (weights.bope) {
        out.balance_bope = l1_discrepancy(logged, proposed, *weights.bope, fmap).discrepancy;
        out.ess_bope = weight_summary(*weights.bope).effective_sample_size;
    }

    auto push = [&](const std::string& est, const std::string& source, const EstimatorResult& res) {
        ReplicationRecord rec;
        rec.replication = rep;
        rec.estimator = est;
        rec.weight_source = source;
        rec.value = res.value;
        rec.n_effective = res.n_effective;
        rec.tau = res.tau_used;
        out.records.push_back(std::move(rec));
    };
    auto push_error = [&](const std::string& est, const std::string& source, const std::string& msg) {
        ReplicationRecord rec;
        rec.replication = rep;
        rec.estimator = est;
        rec.weight_source = source;
        rec.error = msg;
        out.records.push_back(std::move(rec));
    };

    auto weighted = [&](const std::string& est, const std::string& source, const WeightVector& wv) {
        try {
            if (est == "is") {
                push(est, source, importance_sampling(logged, proposed, wv, rejection, true));
            } else if (est == "dr") {
                push(est, source, doubly_robust(logged, proposed, *reward_model, wv, rejection));
            } else {
                std::vector<double> candidates;
                candidates.reserve(cfg.tau_quantiles.size());
                for (const double q : cfg.tau_quantiles) candidates.push_back(weight_quantile(wv.weights, q));
                const bool dr_flavor = est == "switch_dr";
                auto [tau, res] =
                    tune_switch_tau(logged, proposed, *reward_model, wv, rejection, candidates, dr_flavor);
                (void)tau;
                push(est, source, res);
            }
        } catch (const Error& e) {
            push_error(est, source, e.what());
        }
    };

    for (const std::string& est : cfg.estimators) {
        if (est == "dm") {
            if (!reward_model) {
                push_error(est, "none", reward_model_error);
                continue;
            }
            try {
                push(est, "none", direct_method(*reward_model, logged.states, proposed));
            } catch (const Error& e) {
                push_error(est, "none", e.what());
            }
            continue;
        }
        const bool needs_model = est != "is";
        for (const std::string& source : {std::string("ips"), std::string("bope")}) {
            const auto& wv = source == "ips" ? weights.ips : weights.bope;
            const auto& werr = source == "ips" ? weights.ips_error : weights.bope_error;
            if (!wv) {
                push_error(est, source, werr);
                continue;
            }
            if (needs_model && !reward_model) {
                push_error(est, source, reward_model_error);
                continue;
            }
            weighted(est, source, *wv);
        }
    }
    return out;
}

bool estimator_list_needs_reward_model(const std::vector<std::string>& estimators) {
    for (const auto& e : estimators)
        if (e == "dm" || e == "dr" || e == "switch" || e == "switch_dr") return true;
    return false;
}

ClassifierConfig resolve_rounds(ClassifierConfig cfg, int rounds_if_auto) {
    if (cfg.family == ModelFamily::Gbt && cfg.rounds == 0) cfg.rounds = rounds_if_auto;
    return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV ingestion and synthetic datasets
// ---------------------------------------------------------------------------

TabularDataset load_csv(const std::string& path, const std::string& label_column, ActionKind mode) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file", 0, "");
    std::vector<std::string> header = split(trim(line), ',');
    for (auto& h : header) h = trim(h);

    Eigen::Index label_idx = -1;
    for (std::size_t j = 0; j < header.size(); ++j)
        if (header[j] == label_column) label_idx = static_cast<Eigen::Index>(j);
    if (label_idx < 0) throw ParseError("label column not found", 0, label_column);

    const std::size_t ncols = header.size();
    std::vector<std::vector<double>> feature_rows;
    std::vector<std::string> raw_labels;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto fields = split(t, ',');
        if (fields.size() != ncols)
            throw ParseError("expected " + std::to_string(ncols) + " fields, got " +
                                 std::to_string(fields.size()),
                             lineno, "");
        std::vector<double> row;
        row.reserve(ncols - 1);
        for (std::size_t j = 0; j < ncols; ++j) {
            if (static_cast<Eigen::Index>(j) == label_idx) {
                raw_labels.push_back(trim(fields[j]));
                continue;
            }
            double v;
            if (!parse_double_strict(fields[j], &v)) throw ParseError("non-numeric feature", lineno, header[j]);
            if (!std::isfinite(v)) throw NonFiniteValue("non-finite feature at row " + std::to_string(lineno));
            row.push_back(v);
        }
        feature_rows.push_back(std::move(row));
    }
    if (feature_rows.empty()) throw ParseError("no data rows", lineno, "");

    TabularDataset ds;
    ds.mode = mode;
    ds.name = path;
    const Eigen::Index n = static_cast<Eigen::Index>(feature_rows.size());
    const Eigen::Index p = static_cast<Eigen::Index>(feature_rows.front().size());
    if (p < 1) throw ParseError("no feature columns", 1, "");
    ds.features.resize(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < p; ++j) ds.features(i, j) = feature_rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

    if (mode == ActionKind::Discrete) {
        std::set<std::string> distinct(raw_labels.begin(), raw_labels.end());
        if (distinct.size() < 2) throw SingleClass("label column has a single class");
        std::map<std::string, int> index;
        int next = 0;
        for (const auto& v : distinct) index[v] = next++;  // sorted order
        ds.class_labels.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) ds.class_labels[i] = index[raw_labels[static_cast<std::size_t>(i)]];
        ds.num_classes = next;
    } else {
        ds.real_labels.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double v;
            if (!parse_double_strict(raw_labels[static_cast<std::size_t>(i)], &v))
                throw ParseError("non-numeric label", static_cast<std::size_t>(i) + 2, label_column);
            if (!std::isfinite(v)) throw NonFiniteValue("non-finite label");
            ds.real_labels[i] = v;
        }
    }
    return ds;
}

TabularDataset synth_multiclass(int n, int k, int p, double noise, RngSpec rng) {
    if (n < 2 || k < 2 || p < 1) throw OutOfRange("synth_multiclass needs n >= 2, k >= 2, p >= 1");
    Rng gen(rng);
    Matrix centers(k, p);
    for (int c = 0; c < k; ++c)
        for (int j = 0; j < p; ++j) centers(c, j) = 2.0 * gen.normal();

    TabularDataset ds;
    ds.name = "synth-multiclass-k" + std::to_string(k);
    ds.mode = ActionKind::Discrete;
    ds.num_classes = k;
    ds.features.resize(n, p);
    ds.class_labels.resize(n);
    for (int i = 0; i < n; ++i) {
        const int y = static_cast<int>(gen.below(static_cast<std::uint64_t>(k)));
        ds.class_labels[i] = y;
        for (int j = 0; j < p; ++j) ds.features(i, j) = centers(y, j) + noise * gen.normal();
    }
    return ds;
}

TabularDataset synth_regression(int n, int p, double noise, RngSpec rng) {
    if (n < 2 || p < 2) throw OutOfRange("synth_regression needs n >= 2, p >= 2");
    Rng gen(rng);
    TabularDataset ds;
    ds.name = "synth-regression";
    ds.mode = ActionKind::Continuous;
    ds.features.resize(n, p);
    ds.real_labels.resize(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) ds.features(i, j) = gen.uniform01();
        // Bimodal label marginal: a jump on the first feature plus a slope.
        ds.real_labels[i] =
            3.0 * (ds.features(i, 0) > 0.5 ? 1.0 : 0.0) + 2.0 * ds.features(i, 1) + noise * 0.3 * gen.normal();
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Experiment config
// ---------------------------------------------------------------------------

ExperimentConfig parse_config_text(const std::string& text) {
    KvReader kv(text);
    ExperimentConfig cfg;

    if (auto v = kv.take("mode")) {
        if (*v == "discrete")
            cfg.mode = ActionKind::Discrete;
        else if (*v == "continuous")
            cfg.mode = ActionKind::Continuous;
        else
            throw ConfigError("mode must be discrete or continuous");
    }
    if (auto v = kv.take("data")) cfg.data_path = *v;
    if (auto v = kv.take("label")) cfg.label_column = *v;
    if (auto v = kv.take("synth")) cfg.synth = *v;
    if (auto v = kv.take_int("synth.n")) cfg.synth_n = static_cast<int>(*v);
    if (auto v = kv.take_int("synth.k")) cfg.synth_k = static_cast<int>(*v);
    if (auto v = kv.take_int("synth.p")) cfg.synth_p = static_cast<int>(*v);
    if (auto v = kv.take_double("synth.noise")) cfg.synth_noise = *v;
    if (auto v = kv.take("oracle")) cfg.oracle = *v;
    if (auto v = kv.take_int("n")) cfg.oracle_n = static_cast<int>(*v);
    if (auto v = kv.take_int("replications")) cfg.replications = static_cast<int>(*v);
    if (auto v = kv.take_int("seed")) cfg.seed = static_cast<std::uint64_t>(*v);
    if (auto v = kv.take_int("folds")) cfg.folds = static_cast<int>(*v);
    if (auto v = kv.take_double("clip_epsilon")) cfg.clip_epsilon = *v;
    if (auto v = kv.take_double("density_floor")) cfg.density_floor = *v;
    if (auto v = kv.take("kernel")) {
        if (*v == "gaussian")
            cfg.kernel = KernelKind::Gaussian;
        else if (*v == "epanechnikov")
            cfg.kernel = KernelKind::Epanechnikov;
        else
            throw ConfigError("kernel must be gaussian or epanechnikov");
    }
    if (auto v = kv.take_double("bandwidth_c")) cfg.bandwidth_c = *v;
    if (auto v = kv.take("tau_quantiles")) {
        cfg.tau_quantiles.clear();
        for (const auto& part : split(*v, ',')) {
            double q;
            if (!parse_double_strict(part, &q)) throw ConfigError("bad tau quantile '" + part + "'");
            cfg.tau_quantiles.push_back(q);
        }
    }
    if (auto v = kv.take("estimators")) {
        cfg.estimators.clear();
        for (const auto& part : split(*v, ',')) cfg.estimators.push_back(trim(part));
    }
    if (auto v = kv.take("out")) cfg.out_path = *v;
    if (auto v = kv.take_int("threads")) cfg.threads = static_cast<int>(*v);
    if (auto v = kv.take_int("min_class_count")) cfg.min_class_count = static_cast<int>(*v);
    if (auto v = kv.take("name")) cfg.dataset_name = *v;

    read_model_config(kv, "target", &cfg.models.target);
    read_model_config(kv, "dm", &cfg.models.dm);
    read_model_config(kv, "propensity", &cfg.models.propensity);
    read_model_config(kv, "bope", &cfg.models.bope);
    kv.finish();

    // Cross-field validation.
    int sources = 0;
    if (!cfg.data_path.empty()) ++sources;
    if (!cfg.synth.empty()) ++sources;
    if (!cfg.oracle.empty()) ++sources;
    if (sources != 1) throw ConfigError("exactly one of data, synth, oracle must be set");
    if (!cfg.data_path.empty() && cfg.label_column.empty())
        throw ConfigError("data mode requires the label key");
    if (!cfg.synth.empty() && cfg.synth != "multiclass" && cfg.synth != "regression")
        throw ConfigError("synth must be multiclass or regression");
    if (cfg.synth == "multiclass" && cfg.mode != ActionKind::Discrete)
        throw ConfigError("synth multiclass requires discrete mode");
    if (cfg.synth == "regression" && cfg.mode != ActionKind::Continuous)
        throw ConfigError("synth regression requires continuous mode");
    if (cfg.replications < 1) throw ConfigError("replications must be at least 1");
    if (cfg.folds < 2) throw ConfigError("folds must be at least 2");
    if (!(cfg.clip_epsilon > 0.0) || !(cfg.clip_epsilon < 0.5))
        throw ConfigError("clip_epsilon must lie in (0, 0.5)");
    if (!(cfg.density_floor > 0.0) || !(cfg.density_floor < 0.5))
        throw ConfigError("density_floor must lie in (0, 0.5)");
    if (!(cfg.bandwidth_c > 0.0)) throw ConfigError("bandwidth_c must be positive");
    if (cfg.threads < 1) throw ConfigError("threads must be at least 1");
    if (cfg.oracle_n < 2) throw ConfigError("n must be at least 2");
    if (cfg.tau_quantiles.empty()) throw ConfigError("tau_quantiles must be nonempty");
    for (const double q : cfg.tau_quantiles)
        if (!std::isinf(q) && (!(q > 0.0) || q > 1.0))
            throw ConfigError("tau quantile levels must lie in (0, 1] or be inf");
    if (cfg.estimators.empty()) throw ConfigError("estimators must be nonempty");
    for (const auto& e : cfg.estimators)
        if (e != "dm" && e != "is" && e != "dr" && e != "switch" && e != "switch_dr")
            throw ConfigError("unknown estimator '" + e + "'");
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string canonical_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    char num[64];
    auto put_num = [&](const char* key, double v) {
        std::snprintf(num, sizeof(num), "%.17g", v);
        out << key << "=" << num << "\n";
    };
    out << "mode=" << (cfg.mode == ActionKind::Discrete ? "discrete" : "continuous") << "\n";
    out << "data=" << cfg.data_path << "\n";
    out << "label=" << cfg.label_column << "\n";
    out << "synth=" << cfg.synth << "\n";
    out << "synth.n=" << cfg.synth_n << "\n";
    out << "synth.k=" << cfg.synth_k << "\n";
    out << "synth.p=" << cfg.synth_p << "\n";
    put_num("synth.noise", cfg.synth_noise);
    out << "oracle=" << cfg.oracle << "\n";
    out << "n=" << cfg.oracle_n << "\n";
    out << "replications=" << cfg.replications << "\n";
    out << "seed=" << cfg.seed << "\n";
    out << "folds=" << cfg.folds << "\n";
    put_num("clip_epsilon", cfg.clip_epsilon);
    put_num("density_floor", cfg.density_floor);
    out << "kernel=" << (cfg.kernel == KernelKind::Gaussian ? "gaussian" : "epanechnikov") << "\n";
    put_num("bandwidth_c", cfg.bandwidth_c);
    out << "tau_quantiles=";
    for (std::size_t i = 0; i < cfg.tau_quantiles.size(); ++i) {
        if (i) out << ",";
        if (std::isinf(cfg.tau_quantiles[i])) {
            out << "inf";
        } else {
            std::snprintf(num, sizeof(num), "%.17g", cfg.tau_quantiles[i]);
            out << num;
        }
    }
    out << "\n";
    out << "estimators=";
    for (std::size_t i = 0; i < cfg.estimators.size(); ++i) out << (i ? "," : "") << cfg.estimators[i];
    out << "\n";
    out << "min_class_count=" << cfg.min_class_count << "\n";
    out << "name=" << cfg.dataset_name << "\n";
    out << "target=" << model_config_string(cfg.models.target) << "\n";
    out << "dm=" << model_config_string(cfg.models.dm) << "\n";
    out << "propensity=" << model_config_string(cfg.models.propensity) << "\n";
    out << "bope=" << model_config_string(cfg.models.bope) << "\n";
    return out.str();
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (const unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001B3ULL;
    }
    return hash;
}

Summary summarize(const std::vector<double>& estimates, double truth) {
    if (estimates.empty()) throw EmptyInput("no estimates to summarize");
    const double n = static_cast<double>(estimates.size());
    double mean = 0.0;
    for (const double e : estimates) mean += e;
    mean /= n;

    double msq = 0.0;
    for (const double e : estimates) msq += (e - truth) * (e - truth);
    msq /= n;

    Summary s;
    s.bias = mean - truth;
    s.rmse = std::sqrt(msq);
    if (estimates.size() > 1 && s.rmse > 0.0) {
        double var_sq = 0.0;
        for (const double e : estimates) {
            const double sq = (e - truth) * (e - truth);
            var_sq += (sq - msq) * (sq - msq);
        }
        var_sq /= (n - 1.0);
        // Delta method: se(rmse) = se(mse) / (2 rmse).
        s.se = std::sqrt(var_sq / n) / (2.0 * s.rmse);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Bandit transformations
// ---------------------------------------------------------------------------

namespace {

BanditBundle split_and_target(const TabularDataset& data, const ExperimentConfig& cfg, RngSpec rng) {
    const Eigen::Index n = data.features.rows();
    BanditBundle bundle;
    bundle.mode = data.mode;

    // Low-frequency class filter (discrete only).
    std::vector<Eigen::Index> keep;
    IntVector relabel;
    if (data.mode == ActionKind::Discrete) {
        std::vector<int> counts(static_cast<std::size_t>(data.num_classes), 0);
        for (Eigen::Index i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(data.class_labels[i])];
        relabel = IntVector::Constant(data.num_classes, -1);
        int next = 0;
        for (int c = 0; c < data.num_classes; ++c) {
            if (counts[static_cast<std::size_t>(c)] >= cfg.min_class_count) {
                relabel[c] = next++;
            } else {
                bundle.warnings.push_back(
                    "dropped class " + std::to_string(c) + " with " +
                    std::to_string(counts[static_cast<std::size_t>(c)]) + " rows (min_class_count " +
                    std::to_string(cfg.min_class_count) + ")");
            }
        }
        bundle.k = next;
        if (bundle.k < 2) throw SingleClass("fewer than 2 classes remain after filtering");
        for (Eigen::Index i = 0; i < n; ++i)
            if (relabel[data.class_labels[i]] >= 0) keep.push_back(i);
        if (static_cast<Eigen::Index>(keep.size()) < 4 * bundle.k)
            throw TooFewRows("need at least 4k rows after filtering");
    } else {
        keep.resize(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) keep[static_cast<std::size_t>(i)] = i;
        if (keep.size() < 8) throw TooFewRows("need at least 8 rows");
    }

    // One 50/50 split per experiment.
    Rng gen(substream(rng, kSaltSplit));
    const auto perm = gen.permutation(keep.size());
    const std::size_t n_train = keep.size() / 2;

    auto gather = [&](std::size_t from, std::size_t to, Matrix* X, IntVector* yc, Vector* yr) {
        X->resize(static_cast<Eigen::Index>(to - from), data.features.cols());
        if (data.mode == ActionKind::Discrete) yc->resize(static_cast<Eigen::Index>(to - from));
        else yr->resize(static_cast<Eigen::Index>(to - from));
        for (std::size_t i = from; i < to; ++i) {
            const Eigen::Index src = keep[perm[i]];
            const Eigen::Index dst = static_cast<Eigen::Index>(i - from);
            X->row(dst) = data.features.row(src);
            if (data.mode == ActionKind::Discrete)
                (*yc)[dst] = relabel[data.class_labels[src]];
            else
                (*yr)[dst] = data.real_labels[src];
        }
    };
    gather(0, n_train, &bundle.train_states, &bundle.train_class, &bundle.train_real);
    gather(n_train, keep.size(), &bundle.test_states, &bundle.test_class, &bundle.test_real);
    return bundle;
}

}  // namespace

BanditBundle classification_to_bandit(const TabularDataset& data, const ExperimentConfig& cfg,
                                      RngSpec rng) {
    if (data.mode != ActionKind::Discrete) throw VariantMismatch("classification_to_bandit needs discrete data");
    BanditBundle bundle = split_and_target(data, cfg, rng);

    const auto n_train = static_cast<std::size_t>(bundle.train_states.rows());
    const ClassifierConfig target_cfg =
        resolve_rounds(cfg.models.target, ensemble_size_rule(n_train));
    const auto target = train_multiclass(bundle.train_states, bundle.train_class, bundle.k, target_cfg,
                                         substream(rng, kSaltTargetFit));

    auto to_actions = [](const IntVector& preds) {
        std::vector<Action> out;
        out.reserve(static_cast<std::size_t>(preds.size()));
        for (Eigen::Index i = 0; i < preds.size(); ++i) out.push_back(Action::discrete(preds[i]));
        return out;
    };
    const IntVector pred_train = target.predict(bundle.train_states);
    const IntVector pred_test = target.predict(bundle.test_states);
    bundle.proposed_train = ProposedActions{to_actions(pred_train)};
    bundle.proposed_test = ProposedActions{to_actions(pred_test)};

    // True target value on test = target-policy accuracy on the held labels.
    double correct = 0.0;
    for (Eigen::Index i = 0; i < pred_test.size(); ++i)
        if (pred_test[i] == bundle.test_class[i]) correct += 1.0;
    bundle.truth = correct / static_cast<double>(pred_test.size());
    return bundle;
}

BanditBundle regression_to_bandit(const TabularDataset& data, const ExperimentConfig& cfg, RngSpec rng) {
    if (data.mode != ActionKind::Continuous) throw VariantMismatch("regression_to_bandit needs continuous data");
    BanditBundle bundle = split_and_target(data, cfg, rng);

    const auto n_train = static_cast<std::size_t>(bundle.train_states.rows());
    const ClassifierConfig target_cfg =
        resolve_rounds(cfg.models.target, ensemble_size_rule(n_train));
    const Regressor target =
        train_regressor(bundle.train_states, bundle.train_real, target_cfg, substream(rng, kSaltTargetFit));

    auto to_actions = [](const Vector& preds) {
        std::vector<Action> out;
        out.reserve(static_cast<std::size_t>(preds.size()));
        for (Eigen::Index i = 0; i < preds.size(); ++i) out.push_back(Action::continuous(preds[i]));
        return out;
    };
    const Vector pred_train = target.predict(bundle.train_states);
    const Vector pred_test = target.predict(bundle.test_states);
    bundle.proposed_train = ProposedActions{to_actions(pred_train)};
    bundle.proposed_test = ProposedActions{to_actions(pred_test)};

    // True value = -(mean distance of target actions to the held labels).
    bundle.truth = -(pred_test - bundle.test_real).cwiseAbs().mean();
    bundle.action_pool = bundle.train_real;
    return bundle;
}

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

namespace {

struct OracleContext {
    std::variant<DiscreteOracle, ContinuousOracle> oracle;
    bool discrete() const { return std::holds_alternative<DiscreteOracle>(oracle); }
};

LoggedDataset draw_dataset_logged(const BanditBundle& bundle, const Matrix& states, const IntVector& yc,
                                  const Vector& yr, RngSpec rng) {
    Rng gen(rng);
    const Eigen::Index n = states.rows();
    std::vector<Action> actions;
    actions.reserve(static_cast<std::size_t>(n));
    Vector rewards(n);
    if (bundle.mode == ActionKind::Discrete) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const int a = static_cast<int>(gen.below(static_cast<std::uint64_t>(bundle.k)));
            actions.push_back(Action::discrete(a));
            rewards[i] = a == yc[i] ? 1.0 : 0.0;
        }
    } else {
        const auto pool = static_cast<std::uint64_t>(bundle.action_pool.size());
        for (Eigen::Index i = 0; i < n; ++i) {
            const double a = bundle.action_pool[static_cast<Eigen::Index>(gen.below(pool))];
            actions.push_back(Action::continuous(a));
            rewards[i] = -std::abs(a - yr[i]);
        }
    }
    return make_logged_dataset(states, std::move(actions), std::move(rewards));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    ExperimentResult result;
    const RngSpec base{cfg.seed, 0};
    const bool needs_model = estimator_list_needs_reward_model(cfg.estimators);

    std::optional<BanditBundle> bundle;
    std::optional<OracleContext> oracle_ctx;

    if (!cfg.oracle.empty()) {
        oracle_ctx = OracleContext{load_oracle(cfg.oracle)};
        if (oracle_ctx->discrete()) {
            if (cfg.mode != ActionKind::Discrete) throw ConfigError("oracle is discrete but mode is continuous");
            result.truth = true_value(std::get<DiscreteOracle>(oracle_ctx->oracle));
            result.dataset_name = std::get<DiscreteOracle>(oracle_ctx->oracle).name;
        } else {
            if (cfg.mode != ActionKind::Continuous) throw ConfigError("oracle is continuous but mode is discrete");
            const auto mc = true_value_mc(std::get<ContinuousOracle>(oracle_ctx->oracle), 1000000,
                                          substream(base, kSaltTruthMc));
            result.truth = mc.value;
            result.truth_se = mc.se;
            result.dataset_name = std::get<ContinuousOracle>(oracle_ctx->oracle).name;
        }
    } else {
        TabularDataset data;
        if (!cfg.synth.empty()) {
            data = cfg.synth == "multiclass"
                       ? synth_multiclass(cfg.synth_n, cfg.synth_k, cfg.synth_p, cfg.synth_noise,
                                          substream(base, kSaltSynth))
                       : synth_regression(cfg.synth_n, cfg.synth_p, cfg.synth_noise,
                                          substream(base, kSaltSynth));
        } else {
            data = load_csv(cfg.data_path, cfg.label_column, cfg.mode);
        }
        result.dataset_name = data.name;
        bundle = cfg.mode == ActionKind::Discrete ? classification_to_bandit(data, cfg, base)
                                                  : regression_to_bandit(data, cfg, base);
        for (const auto& w : bundle->warnings) result.warnings.push_back(w);
        result.truth = bundle->truth;
    }
    if (!cfg.dataset_name.empty()) result.dataset_name = cfg.dataset_name;

    const int reps = cfg.replications;
    std::vector<RepOutcome> outcomes(static_cast<std::size_t>(reps));

    auto run_rep = [&](int r) {
        const RngSpec rep = substream(base, kSaltRepBase + static_cast<std::uint64_t>(r));
        LoggedDataset logged;
        ProposedActions proposed;
        WeightBundle weights;
        std::optional<RewardModel> reward_model;
        std::string reward_model_error = "reward model not fitted";
        RejectionSpec rejection = RejectionSpec::discrete_indicator();
        std::optional<int> enc_k;

        if (oracle_ctx) {
            if (oracle_ctx->discrete()) {
                const auto& oracle = std::get<DiscreteOracle>(oracle_ctx->oracle);
                logged = generate_logged(oracle, static_cast<std::size_t>(cfg.oracle_n),
                                         substream(rep, kRepTestLog));
                proposed = sample_proposed(oracle, logged, substream(rep, kRepProposed));
                enc_k = static_cast<int>(oracle.num_actions());
            } else {
                const auto& oracle = std::get<ContinuousOracle>(oracle_ctx->oracle);
                logged = generate_logged(oracle, static_cast<std::size_t>(cfg.oracle_n),
                                         substream(rep, kRepTestLog));
                proposed = sample_proposed(oracle, logged, substream(rep, kRepProposed));
            }

            try {
                weights.bope = estimate_bope_weights(logged, proposed, cfg.models.bope, cfg.folds,
                                                     cfg.clip_epsilon, substream(rep, kRepBopeCrossfit));
            } catch (const Error& e) {
                weights.bope_error = e.what();
            }
            try {
                const PropensityModel prop =
                    logged.kind == ActionKind::Discrete
                        ? fit_propensity_discrete(logged.states, logged.actions, *enc_k,
                                                  cfg.models.propensity, substream(rep, kRepPropensityFit))
                        : fit_propensity_continuous(logged.states, logged.actions, cfg.models.propensity,
                                                    substream(rep, kRepPropensityFit));
                weights.ips = propensity_weights(prop, logged, cfg.density_floor);
            } catch (const Error& e) {
                weights.ips_error = e.what();
            }
            if (needs_model) {
                try {
                    const Matrix enc = encode_state_action(logged.states, logged.actions, enc_k);
                    reward_model = RewardModel::from_regressor(
                        train_regressor(enc, logged.rewards, cfg.models.dm, substream(rep, kRepDmFit)),
                        logged.kind, enc_k);
                } catch (const Error& e) {
                    reward_model_error = e.what();
                }
            }
        } else {
            // Dataset mode: evaluation data on the test half, nuisance models
            // refit per replication on a fresh train-half logging draw.
            logged = draw_dataset_logged(*bundle, bundle->test_states, bundle->test_class,
                                         bundle->test_real, substream(rep, kRepTestLog));
            proposed = bundle->proposed_test;
            if (bundle->mode == ActionKind::Discrete) enc_k = bundle->k;

            const LoggedDataset train_logged =
                draw_dataset_logged(*bundle, bundle->train_states, bundle->train_class, bundle->train_real,
                                    substream(rep, kRepTrainLog));

            try {
                const DiscriminationSet disc =
                    build_discrimination_set(train_logged, bundle->proposed_train, enc_k);
                const auto clf = train_classifier(disc.features, disc.labels, cfg.models.bope,
                                                  substream(rep, kRepBopeFit));
                weights.bope = bope_weights_from_classifier(clf, logged, enc_k, cfg.clip_epsilon);
            } catch (const Error& e) {
                weights.bope_error = e.what();
            }
            try {
                const PropensityModel prop =
                    bundle->mode == ActionKind::Discrete
                        ? fit_propensity_discrete(train_logged.states, train_logged.actions, bundle->k,
                                                  cfg.models.propensity, substream(rep, kRepPropensityFit))
                        : fit_propensity_continuous(train_logged.states, train_logged.actions,
                                                    cfg.models.propensity,
                                                    substream(rep, kRepPropensityFit));
                weights.ips = propensity_weights(prop, logged, cfg.density_floor);
            } catch (const Error& e) {
                weights.ips_error = e.what();
            }
            if (needs_model) {
                try {
                    const Matrix enc =
                        encode_state_action(train_logged.states, train_logged.actions, enc_k);
                    reward_model = RewardModel::from_regressor(
                        train_regressor(enc, train_logged.rewards, cfg.models.dm,
                                        substream(rep, kRepDmFit)),
                        bundle->mode, enc_k);
                } catch (const Error& e) {
                    reward_model_error = e.what();
                }
            }
        }

        if (logged.kind == ActionKind::Continuous) {
            rejection = RejectionSpec::continuous_kernel(
                cfg.kernel,
                bandwidth_rule(static_cast<std::size_t>(logged.n()), action_scale(logged.actions),
                               cfg.bandwidth_c));
        }

        outcomes[static_cast<std::size_t>(r)] = evaluate_replication(
            r, cfg, logged, proposed, weights, reward_model, reward_model_error, rejection);
    };

    parallel_for(reps, cfg.threads, run_rep);

    // Deterministic aggregation in replication order.
    for (const auto& outcome : outcomes)
        for (const auto& rec : outcome.records) result.records.push_back(rec);

    auto aggregate = [&](const std::string& est, const std::string& source) {
        ReportRow row;
        row.dataset = result.dataset_name;
        row.estimator = est;
        row.weight_source = source;
        row.has_weights = source != "none";
        std::vector<double> estimates;
        double balance_sum = 0.0, ess_sum = 0.0;
        for (int r = 0; r < reps; ++r) {
            const auto& outcome = outcomes[static_cast<std::size_t>(r)];
            for (const auto& rec : outcome.records) {
                if (rec.estimator != est || rec.weight_source != source) continue;
                if (!rec.error.empty()) {
                    result.warnings.push_back("replication " + std::to_string(r) + " " + est + "/" +
                                              source + " failed: " + rec.error);
                    continue;
                }
                estimates.push_back(rec.value);
                if (source == "ips") {
                    balance_sum += outcome.balance_ips.value_or(0.0);
                    ess_sum += outcome.ess_ips.value_or(0.0);
                } else if (source == "bope") {
                    balance_sum += outcome.balance_bope.value_or(0.0);
                    ess_sum += outcome.ess_bope.value_or(0.0);
                }
            }
        }
        row.replications_used = static_cast<int>(estimates.size());
        if (!estimates.empty()) {
            const Summary s = summarize(estimates, result.truth);
            row.bias = s.bias;
            row.rmse = s.rmse;
            row.rmse_se = s.se;
            if (row.has_weights) {
                row.balance_l1 = balance_sum / static_cast<double>(estimates.size());
                row.mean_ess = ess_sum / static_cast<double>(estimates.size());
            }
        }
        result.rows.push_back(std::move(row));
    };

    for (const std::string& est : cfg.estimators) {
        if (est == "dm") {
            aggregate(est, "none");
        } else {
            aggregate(est, "ips");
            aggregate(est, "bope");
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

std::string format_report_csv(const ExperimentResult& result) {
    std::ostringstream out;
    out << "dataset,estimator,weight_source,bias,rmse,rmse_se,balance_l1,mean_ess,replications_used\n";
    for (const auto& row : result.rows) {
        out << row.dataset << "," << row.estimator << "," << row.weight_source << ","
            << format_number(row.bias) << "," << format_number(row.rmse) << ","
            << format_number(row.rmse_se) << ",";
        if (row.has_weights)
            out << format_number(row.balance_l1) << "," << format_number(row.mean_ess);
        else
            out << ",";
        out << "," << row.replications_used << "\n";
    }
    return out.str();
}

std::string format_records_csv(const ExperimentResult& result) {
    std::ostringstream out;
    out << "replication,estimator,weight_source,value,n_effective,tau,error\n";
    for (const auto& rec : result.records) {
        out << rec.replication << "," << rec.estimator << "," << rec.weight_source << ",";
        if (rec.error.empty()) out << format_number(rec.value) << "," << format_number(rec.n_effective);
        else out << ",";
        out << ",";
        if (rec.tau) out << format_number(*rec.tau);
        out << ",";
        std::string err = rec.error;
        std::replace(err.begin(), err.end(), ',', ';');
        out << err << "\n";
    }
    return out.str();
}

std::string format_metadata_json(const ExperimentResult& result, const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["tool"] = "bope";
    j["version"] = "0.1.0";
    j["format_version"] = 1;
    j["seed"] = cfg.seed;
    char hash[24];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_config(cfg))));
    j["config_hash"] = hash;
    j["dataset"] = result.dataset_name;
    j["mode"] = cfg.mode == ActionKind::Discrete ? "discrete" : "continuous";
    j["replications"] = cfg.replications;
    j["truth"] = result.truth;
    j["truth_se"] = result.truth_se;
    j["warnings"] = result.warnings;
    return j.dump(2) + "\n";
}

void write_report_files(const ExperimentResult& result, const ExperimentConfig& cfg) {
    {
        std::ofstream out(cfg.out_path, std::ios::binary);
        if (!out) throw FileNotFound("cannot write '" + cfg.out_path + "'");
        out << format_report_csv(result);
    }
    {
        std::ofstream out(cfg.out_path + ".meta.json", std::ios::binary);
        out << format_metadata_json(result, cfg);
    }
    {
        std::ofstream out(cfg.out_path + ".reps.csv", std::ios::binary);
        out << format_records_csv(result);
    }
}

// ---------------------------------------------------------------------------
// Oracle loading
// ---------------------------------------------------------------------------

std::variant<DiscreteOracle, ContinuousOracle> load_oracle(const std::string& name_or_path) {
    if (name_or_path == "p1") return preset_p1();
    if (name_or_path == "p2") return preset_p2();
    if (name_or_path == "p2_null") return preset_p2_null();
    if (name_or_path == "p3") return preset_p3();

    std::ifstream in(name_or_path);
    if (!in) throw FileNotFound("unknown oracle preset and no such file: '" + name_or_path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    KvReader kv(buf.str());

    const auto kind = kv.take("kind");
    if (!kind) throw ConfigError("oracle config needs kind = discrete|continuous");
    const std::string name = kv.take("name").value_or(name_or_path);

    if (*kind == "discrete") {
        auto need = [&](const char* key) {
            auto v = kv.take(key);
            if (!v) throw ConfigError(std::string("oracle config missing key '") + key + "'");
            return *v;
        };
        Vector probs = parse_vector(need("state_probs"), "state_probs");
        Matrix features = parse_matrix(need("state_features"), "state_features");
        Matrix pi0 = parse_matrix(need("pi0"), "pi0");
        Matrix pi1 = parse_matrix(need("pi1"), "pi1");
        Matrix rmean = parse_matrix(need("reward_means"), "reward_means");
        kv.finish();
        return make_discrete_oracle(name, probs, features, pi0, pi1, rmean);
    }
    if (*kind != "continuous") throw ConfigError("oracle kind must be discrete or continuous");

    ContinuousOracle oracle;
    oracle.name = name;
    if (auto v = kv.take("state_law")) {
        if (*v == "normal") oracle.state_law = ContinuousOracle::StateLaw::Normal;
        else if (*v == "uniform") oracle.state_law = ContinuousOracle::StateLaw::Uniform;
        else throw ConfigError("state_law must be normal or uniform");
    }
    if (auto v = kv.take_double("state_a")) oracle.state_a = *v;
    if (auto v = kv.take_double("state_b")) oracle.state_b = *v;
    if (auto v = kv.take_double("mu0_intercept")) oracle.mu0.intercept = *v;
    if (auto v = kv.take_double("mu0_slope")) oracle.mu0.slope = *v;
    if (auto v = kv.take_double("sigma0")) oracle.sigma0 = *v;
    if (auto v = kv.take("pi1_kind")) {
        if (*v == "deterministic") oracle.pi1_deterministic = true;
        else if (*v == "gaussian") oracle.pi1_deterministic = false;
        else throw ConfigError("pi1_kind must be deterministic or gaussian");
    }
    if (auto v = kv.take_double("mu1_intercept")) oracle.mu1.intercept = *v;
    if (auto v = kv.take_double("mu1_slope")) oracle.mu1.slope = *v;
    if (auto v = kv.take_double("sigma1")) oracle.sigma1 = *v;
    if (auto v = kv.take_double("reward_center_intercept")) oracle.reward_center.intercept = *v;
    if (auto v = kv.take_double("reward_center_slope")) oracle.reward_center.slope = *v;
    kv.finish();
    return make_continuous_oracle(oracle);
}

}  // namespace bope
