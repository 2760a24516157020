#include "seqcpd/limits.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "seqcpd/parallel.hpp"

namespace seqcpd {

std::string to_string(Functional f) {
    switch (f) {
        case Functional::UdWeighted: return "ud";
        case Functional::SupNorm: return "supnorm";
        case Functional::SupWeighted: return "supweighted";
    }
    return "?";
}

Functional functional_from_string(const std::string& s) {
    if (s == "ud") return Functional::UdWeighted;
    if (s == "supnorm") return Functional::SupNorm;
    if (s == "supweighted") return Functional::SupWeighted;
    throw std::invalid_argument("unknown functional '" + s + "'");
}

double f_weight(double u) {
    if (u < 0.0 || u > 1.0) throw std::invalid_argument("f_weight: u must lie in [0,1]");
    const double a = std::sqrt(9.0 - u);
    const double b = std::sqrt(1.0 - u);
    return (a + b) / (a + 3.0 * b) * std::sqrt(2.0 / (3.0 - u + a * b));
}

namespace {

void check_mc_args(int d, long grid_size, long replications) {
    if (d < 1) throw std::invalid_argument("dimension must be >= 1");
    if (grid_size < 1) throw std::invalid_argument("grid_size must be >= 1");
    if (replications < 1) throw std::invalid_argument("replications must be >= 1");
}

// One path functional per replication; `weight(i)` maps a grid index to the
// multiplier applied to ||W(u_i)||, with u_i = i/grid.
template <class WeightFn>
std::vector<double> simulate_path_sup(int d, long grid, long reps, std::uint64_t seed,
                                      WeightFn&& weight) {
    check_mc_args(d, grid, reps);
    const double du = 1.0 / static_cast<double>(grid);
    const double sd = std::sqrt(du);
    std::vector<double> out(static_cast<std::size_t>(reps));
    parallel_for_index(reps, [&](long r) {
        std::mt19937_64 gen(derive_seed(seed, static_cast<std::uint64_t>(r)));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> w(static_cast<std::size_t>(d), 0.0);
        double best = 0.0;
        for (long i = 1; i <= grid; ++i) {
            double sumsq = 0.0;
            for (int c = 0; c < d; ++c) {
                w[static_cast<std::size_t>(c)] += sd * normal(gen);
                sumsq += w[static_cast<std::size_t>(c)] * w[static_cast<std::size_t>(c)];
            }
            const double mult = weight(i);
            if (mult > 0.0) best = std::max(best, mult * std::sqrt(sumsq));
        }
        out[static_cast<std::size_t>(r)] = best;
    });
    return out;
}

}  // namespace

std::vector<double> simulate_ud(int d, long grid_size, long replications, std::uint64_t seed) {
    std::vector<double> fw(static_cast<std::size_t>(grid_size) + 1, 0.0);
    for (long i = 1; i <= grid_size; ++i)
        fw[static_cast<std::size_t>(i)] = f_weight(static_cast<double>(i) / grid_size);
    return simulate_path_sup(d, grid_size, replications, seed,
                             [&](long i) { return fw[static_cast<std::size_t>(i)]; });
}

std::vector<double> simulate_sup_norm(int d, long grid_size, long replications,
                                      std::uint64_t seed) {
    return simulate_path_sup(d, grid_size, replications, seed, [](long) { return 1.0; });
}

std::vector<double> simulate_sup_weighted(double gamma, long grid_size, long replications,
                                          std::uint64_t seed) {
    if (gamma < 0.0 || gamma >= 0.5)
        throw std::invalid_argument("simulate_sup_weighted: need 0 <= gamma < 1/2");
    const double du = 1.0 / static_cast<double>(grid_size);
    // For gamma > 0 the weight blows up at 0; exclude s < 1e-3 where the
    // discretized path is dominated by a single increment.
    const double smin = gamma > 0.0 ? 1e-3 : 0.0;
    return simulate_path_sup(1, grid_size, replications, seed, [=](long i) {
        const double s = i * du;
        if (s < smin) return 0.0;
        return gamma == 0.0 ? 1.0 : std::pow(s, -gamma);
    });
}

double empirical_quantile_upper(std::vector<double> sample, double alpha) {
    if (sample.empty()) throw std::invalid_argument("empirical_quantile_upper: empty sample");
    if (alpha <= 0.0 || alpha >= 1.0) throw std::invalid_argument("alpha must lie in (0,1)");
    std::sort(sample.begin(), sample.end());
    const double pos = (1.0 - alpha) * static_cast<double>(sample.size());
    long idx = static_cast<long>(std::ceil(pos)) - 1;
    idx = std::max<long>(0, std::min<long>(idx, static_cast<long>(sample.size()) - 1));
    return sample[static_cast<std::size_t>(idx)];
}

double quantile(const QuantileTable& table, Functional f, int d, double alpha, double gamma,
                const McOptions& mc) {
    if (d < 1) throw std::invalid_argument("quantile: dimension must be >= 1");
    if (alpha <= 0.0 || alpha >= 1.0) throw std::invalid_argument("quantile: alpha must lie in (0,1)");
    if (f == Functional::SupWeighted && (gamma < 0.0 || gamma >= 0.5))
        throw std::invalid_argument("quantile: SupWeighted needs 0 <= gamma < 1/2");
    if (const QuantileEntry* e = table.find(f, d, alpha, gamma)) return e->quantile;
    std::vector<double> sample;
    switch (f) {
        case Functional::UdWeighted: sample = simulate_ud(d, mc.grid_size, mc.replications, mc.seed); break;
        case Functional::SupNorm: sample = simulate_sup_norm(d, mc.grid_size, mc.replications, mc.seed); break;
        case Functional::SupWeighted:
            sample = simulate_sup_weighted(gamma, mc.grid_size, mc.replications, mc.seed);
            break;
    }
    return empirical_quantile_upper(std::move(sample), alpha);
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    return d;
}

double identity_selftest(int d, double grid_T, long grid_size, long replications,
                         std::uint64_t seed) {
    check_mc_args(d, grid_size, replications);
    if (grid_T <= 1.0) throw std::invalid_argument("identity_selftest: grid_T must exceed 1");

    // sup_{t>1} sup_{1<s<t} ||W(s)-sW(1)||/t collapses to
    // sup_{s>1} ||W(s)-sW(1)||/s since 1/t is maximized as t -> s+.
    // The s-grid mirrors the u-grid of the reference functional through
    // u = 1 - 1/s, so both samples carry matched discretization bias.
    const double umax = 1.0 - 1.0 / grid_T;
    std::vector<double> svals(static_cast<std::size_t>(grid_size));
    for (long i = 1; i <= grid_size; ++i) {
        const double u = umax * static_cast<double>(i) / static_cast<double>(grid_size);
        svals[static_cast<std::size_t>(i - 1)] = 1.0 / (1.0 - u);
    }

    std::vector<double> a(static_cast<std::size_t>(replications));
    parallel_for_index(replications, [&](long r) {
        std::mt19937_64 gen(derive_seed(seed, static_cast<std::uint64_t>(r)));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> w1(static_cast<std::size_t>(d));
        std::vector<double> w(static_cast<std::size_t>(d));
        for (int c = 0; c < d; ++c) {
            w1[static_cast<std::size_t>(c)] = normal(gen);  // W(1)
            w[static_cast<std::size_t>(c)] = w1[static_cast<std::size_t>(c)];
        }
        double best = 0.0;
        double s_prev = 1.0;
        for (long i = 0; i < grid_size; ++i) {
            const double s = svals[static_cast<std::size_t>(i)];
            const double sd = std::sqrt(s - s_prev);
            double sumsq = 0.0;
            for (int c = 0; c < d; ++c) {
                w[static_cast<std::size_t>(c)] += sd * normal(gen);
                const double diff = w[static_cast<std::size_t>(c)] - s * w1[static_cast<std::size_t>(c)];
                sumsq += diff * diff;
            }
            best = std::max(best, std::sqrt(sumsq) / s);
            s_prev = s;
        }
        a[static_cast<std::size_t>(r)] = best;
    });

    std::vector<double> b = simulate_ud(d, grid_size, replications, derive_seed(seed, 0x5eedu));
    return ks_distance(std::move(a), std::move(b));
}

void QuantileTable::insert(const QuantileEntry& e) {
    for (auto& cur : entries_) {
        if (cur.functional == e.functional && cur.d == e.d && std::abs(cur.alpha - e.alpha) < 1e-12 &&
            std::abs(cur.gamma - e.gamma) < 1e-12) {
            cur = e;
            return;
        }
    }
    entries_.push_back(e);
}

const QuantileEntry* QuantileTable::find(Functional f, int d, double alpha, double gamma) const {
    for (const auto& e : entries_)
        if (e.functional == f && e.d == d && std::abs(e.alpha - alpha) < 1e-12 &&
            std::abs(e.gamma - gamma) < 1e-12)
            return &e;
    return nullptr;
}

namespace {
constexpr const char* kTableHeader = "# seqcpd quantile table v1";
}

void QuantileTable::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << kTableHeader << "\n";
    out << "functional\td\tgamma\talpha\tquantile\tgrid_size\treplications\tseed\n";
    char buf[256];
    for (const auto& e : entries_) {
        std::snprintf(buf, sizeof(buf), "%s\t%d\t%.6g\t%.6g\t%.6f\t%ld\t%ld\t%llu\n",
                      to_string(e.functional).c_str(), e.d, e.gamma, e.alpha, e.quantile,
                      e.grid_size, e.replications, static_cast<unsigned long long>(e.seed));
        out << buf;
    }
}

QuantileTable QuantileTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open quantile table '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != kTableHeader)
        throw std::runtime_error("'" + path + "' is not a v1 quantile table");
    QuantileTable t;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#' || line.rfind("functional", 0) == 0) continue;
        std::istringstream ss(line);
        std::string fname;
        QuantileEntry e;
        unsigned long long seed = 0;
        if (!(ss >> fname >> e.d >> e.gamma >> e.alpha >> e.quantile >> e.grid_size >>
              e.replications >> seed))
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed row");
        e.functional = functional_from_string(fname);
        e.seed = seed;
        t.insert(e);
    }
    return t;
}

const QuantileTable& QuantileTable::builtin() {
    static const QuantileTable table = [] {
        QuantileTable t;
        struct Row {
            Functional f;
            int d;
            double gamma, alpha, q;
        };
        // Generated with the shipped settings (grid 5000, 50000 replications,
        // seed 20230815); regenerable via the `quantiles` CLI subcommand.
        static constexpr double kG = 0.0;
        const Row rows[] = {
            // SEQCPD_BUILTIN_QUANTILES_BEGIN
            {Functional::UdWeighted, 1, kG, 0.01, 2.597276}, {Functional::UdWeighted, 1, kG, 0.05, 1.978022},
            {Functional::UdWeighted, 1, kG, 0.10, 1.661608}, {Functional::UdWeighted, 2, kG, 0.01, 3.021273},
            {Functional::UdWeighted, 2, kG, 0.05, 2.447549}, {Functional::UdWeighted, 2, kG, 0.10, 2.151900},
            {Functional::UdWeighted, 3, kG, 0.01, 3.357146}, {Functional::UdWeighted, 3, kG, 0.05, 2.801293},
            {Functional::UdWeighted, 3, kG, 0.10, 2.503566}, {Functional::UdWeighted, 4, kG, 0.01, 3.647457},
            {Functional::UdWeighted, 4, kG, 0.05, 3.084179}, {Functional::UdWeighted, 4, kG, 0.10, 2.796417},
            {Functional::UdWeighted, 5, kG, 0.01, 3.912921}, {Functional::UdWeighted, 5, kG, 0.05, 3.334160},
            {Functional::UdWeighted, 5, kG, 0.10, 3.043818}, {Functional::SupNorm, 1, kG, 0.01, 2.829527},
            {Functional::SupNorm, 1, kG, 0.05, 2.250487},    {Functional::SupNorm, 1, kG, 0.10, 1.962574},
            {Functional::SupNorm, 2, kG, 0.01, 3.229579},    {Functional::SupNorm, 2, kG, 0.05, 2.697318},
            {Functional::SupNorm, 2, kG, 0.10, 2.415138},    {Functional::SupNorm, 3, kG, 0.01, 3.556859},
            {Functional::SupNorm, 3, kG, 0.05, 3.020865},    {Functional::SupNorm, 3, kG, 0.10, 2.747747},
            {Functional::SupNorm, 4, kG, 0.01, 3.821299},    {Functional::SupNorm, 4, kG, 0.05, 3.284731},
            {Functional::SupNorm, 4, kG, 0.10, 3.017239},    {Functional::SupNorm, 5, kG, 0.01, 4.070396},
            {Functional::SupNorm, 5, kG, 0.05, 3.532412},    {Functional::SupNorm, 5, kG, 0.10, 3.257326},
            {Functional::SupWeighted, 1, kG, 0.01, 2.829527}, {Functional::SupWeighted, 1, kG, 0.05, 2.250487},
            {Functional::SupWeighted, 1, kG, 0.10, 1.962574},
            // SEQCPD_BUILTIN_QUANTILES_END
        };
        for (const Row& r : rows) {
            QuantileEntry e;
            e.functional = r.f;
            e.d = r.d;
            e.gamma = r.gamma;
            e.alpha = r.alpha;
            e.quantile = r.q;
            e.grid_size = 5000;
            e.replications = 50000;
            e.seed = 20230815;
            t.insert(e);
        }
        return t;
    }();
    return table;
}

}  // namespace seqcpd
