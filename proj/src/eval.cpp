#include "fusiform/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <thread>

namespace fusiform {

namespace {

class DisjointSet {
public:
    explicit DisjointSet(std::size_t n) : parent_(n)
    {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }
    std::size_t find(std::size_t x)
    {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b)
    {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

std::string format_number(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Folds kfold_split(const PairSet& set, std::size_t k, Rng& rng)
{
    if (k == 0) throw UsageError("kfold_split: k must be positive");
    if (set.pairs.empty()) throw UsageError("kfold_split: empty pair set");
    if (k == 1) {
        Folds one(1);
        for (std::size_t i = 0; i < set.pairs.size(); ++i) one[0].push_back(i);
        return one;
    }

    std::map<int, std::size_t> slot;
    for (const auto& p : set.pairs) {
        slot.emplace(p.id_a, slot.size());
        slot.emplace(p.id_b, slot.size());
    }
    DisjointSet ds(slot.size());
    for (const auto& p : set.pairs) ds.unite(slot.at(p.id_a), slot.at(p.id_b));

    // Component root -> its pairs.
    std::map<std::size_t, std::vector<std::size_t>> by_root;
    for (std::size_t i = 0; i < set.pairs.size(); ++i) by_root[ds.find(slot.at(set.pairs[i].id_a))].push_back(i);
    std::vector<std::vector<std::size_t>> components;
    for (auto& [root, pairs] : by_root) components.push_back(std::move(pairs));
    if (components.size() < k) {
        throw InfeasibleSplitError("kfold_split: only " + std::to_string(components.size()) +
                                   " identity components for " + std::to_string(k) + " folds");
    }

    // Shuffle first so equal-sized components land in seed-dependent folds,
    // then place the largest first.
    for (std::size_t i = components.size(); i > 1; --i) std::swap(components[i - 1], components[rng.index(i)]);
    std::stable_sort(components.begin(), components.end(),
                     [](const auto& a, const auto& b) { return a.size() > b.size(); });

    Folds folds(k);
    for (auto& comp : components) {
        auto target = std::min_element(folds.begin(), folds.end(),
                                       [](const auto& a, const auto& b) { return a.size() < b.size(); });
        target->insert(target->end(), comp.begin(), comp.end());
    }
    const double mean = static_cast<double>(set.pairs.size()) / static_cast<double>(k);
    for (auto& f : folds) {
        std::sort(f.begin(), f.end());
        const auto size = static_cast<double>(f.size());
        if (size < 0.8 * mean || size > 1.2 * mean) {
            throw InfeasibleSplitError("kfold_split: cannot balance identity-disjoint folds within 20% (fold of " +
                                       std::to_string(f.size()) + " pairs, mean " + format_number(mean) + ")");
        }
    }
    return folds;
}

std::uint64_t fold_hash(const Folds& folds)
{
    std::uint64_t h = mix_seed(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        h = mix_seed(h ^ (0xf01dULL + f));
        for (std::size_t i : folds[f]) h = mix_seed(h ^ i);
    }
    return h;
}

EvalSummary summarize(std::span<const FoldReport> reports, FusionMode mode)
{
    if (reports.empty()) throw UsageError("summarize: no fold reports");
    EvalSummary s;
    s.mode = mode;
    s.folds.assign(reports.begin(), reports.end());
    double total = 0.0;
    for (const auto& r : reports) total += r.accuracy;
    s.mean = total / static_cast<double>(reports.size());
    if (reports.size() > 1) {
        double ss = 0.0;
        for (const auto& r : reports) ss += (r.accuracy - s.mean) * (r.accuracy - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(reports.size() - 1));
    }
    return s;
}

FoldReport evaluate_fold(const PairSet& set, std::span<const FeatureRecord> features, const Folds& folds,
                         std::size_t test_fold, FusionMode mode, const AblationOptions& options)
{
    if (test_fold >= folds.size()) throw UsageError("evaluate_fold: fold index out of range");
    if (features.empty()) throw UsageError("evaluate_fold: no features");
    std::vector<std::size_t> train;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        if (f != test_fold) train.insert(train.end(), folds[f].begin(), folds[f].end());
    }
    const auto& test = folds[test_fold];
    if (train.empty() || test.empty()) throw UsageError("evaluate_fold: empty train or test fold");

    VerifierConfig config;
    config.mode = mode;
    config.vc_dim = features.front().bundle.vc.size();
    config.vd_dim = features.front().bundle.vd.size();
    config.hidden = options.hidden;
    config.abs_diff = options.abs_diff;
    // Same head seed for every mode on a fold: only the input blocks differ.
    const std::uint64_t fold_seed = derive_seed(options.seed, test_fold);
    VerifierModel model(config, fold_seed);
    VerifierHyper hyper = options.hyper;
    hyper.seed = fold_seed;

    train_verifier(model, build_fused_dataset(set, features, train, mode, options.abs_diff), hyper);
    const FusedDataset test_set = build_fused_dataset(set, features, test, mode, options.abs_diff);
    const Tensor scores = model.predict(test_set.rows);

    FoldReport report;
    report.fold_index = test_fold;
    report.n_pairs = test.size();
    for (std::size_t i = 0; i < test.size(); ++i) {
        if ((scores[i] >= report.threshold ? 1 : 0) == test_set.labels[i]) ++report.correct;
    }
    report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.n_pairs);
    return report;
}

AblationTable run_ablation(const PairSet& set, std::span<const FeatureRecord> features, const Folds& folds,
                           std::span<const FusionMode> modes, const AblationOptions& options)
{
    AblationTable table;
    table.fold_hash = fold_hash(folds);
    const std::size_t k = folds.size();

    for (FusionMode mode : modes) {
        // Every mode receives the same fold object; record what it saw.
        table.mode_fold_hashes.push_back(fold_hash(folds));
        std::vector<FoldReport> reports(k);
        const std::size_t threads = options.deterministic ? 1 : std::max<std::size_t>(1, std::min(options.threads, k));
        if (threads == 1) {
            for (std::size_t f = 0; f < k; ++f) reports[f] = evaluate_fold(set, features, folds, f, mode, options);
        } else {
            std::vector<std::thread> pool;
            std::vector<std::exception_ptr> errors(threads);
            for (std::size_t t = 0; t < threads; ++t) {
                pool.emplace_back([&, t] {
                    try {
                        for (std::size_t f = t; f < k; f += threads) {
                            reports[f] = evaluate_fold(set, features, folds, f, mode, options);
                        }
                    } catch (...) {
                        errors[t] = std::current_exception();
                    }
                });
            }
            for (auto& th : pool) th.join();
            for (auto& e : errors) {
                if (e) std::rethrow_exception(e);
            }
        }
        table.summaries.push_back(summarize(reports, mode));
    }
    return table;
}

SeedResult ablate_seed(const PairSet& set, std::span<const FeatureRecord> features, std::uint64_t seed,
                       const BenchmarkOptions& options)
{
    Rng fold_rng(derive_seed(seed, 2));
    const Folds folds = kfold_split(set, options.folds, fold_rng);
    AblationOptions ablation = options.ablation;
    ablation.seed = derive_seed(seed, 3);
    return {seed, run_ablation(set, features, folds, options.modes, ablation)};
}

std::vector<std::pair<FusionMode, double>> mean_across_seeds(std::span<const SeedResult> runs)
{
    std::vector<std::pair<FusionMode, double>> out;
    if (runs.empty()) return out;
    for (std::size_t m = 0; m < runs.front().table.summaries.size(); ++m) {
        double total = 0.0;
        for (const auto& run : runs) total += run.table.summaries.at(m).mean;
        out.emplace_back(runs.front().table.summaries[m].mode, total / static_cast<double>(runs.size()));
    }
    return out;
}

BenchmarkResult run_benchmark(const ImageCodec& codec, const PerceptualModel& perceptual,
                              const BenchmarkOptions& options)
{
    BenchmarkResult result;
    for (std::uint64_t seed : options.seeds) {
        Rng data_rng(derive_seed(seed, 1));
        const PairSet set = build_pair_set(options.identities, options.images_per_id, data_rng, options.pair_options);
        std::vector<Tensor> images;
        images.reserve(set.images.size());
        for (const auto& im : set.images) images.push_back(im.pixels);
        const auto features = extract_batch(images, codec, perceptual, options.extract);
        result.runs.push_back(ablate_seed(set, features, seed, options));
    }
    result.mean_across_seeds = mean_across_seeds(result.runs);
    return result;
}

void write_ablation_csv(std::ostream& out, std::span<const SeedResult> runs)
{
    out << "seed,mode,fold,accuracy,n_pairs\n";
    for (const auto& run : runs) {
        for (const auto& s : run.table.summaries) {
            for (const auto& f : s.folds) {
                out << run.seed << ',' << to_string(s.mode) << ',' << f.fold_index << ',' << format_number(f.accuracy)
                    << ',' << f.n_pairs << '\n';
            }
        }
    }
}

void write_summary_csv(std::ostream& out, std::span<const SeedResult> runs)
{
    out << "seed,mode,mean,std\n";
    for (const auto& run : runs) {
        for (const auto& s : run.table.summaries) {
            out << run.seed << ',' << to_string(s.mode) << ',' << format_number(s.mean) << ',' << format_number(s.std)
                << '\n';
        }
    }
    if (runs.size() < 2) return;
    // Aggregate rows: mean and sample std of the per-seed means.
    const std::size_t modes = runs.front().table.summaries.size();
    for (std::size_t m = 0; m < modes; ++m) {
        std::vector<FoldReport> per_seed;
        for (const auto& run : runs) {
            FoldReport r;
            r.accuracy = run.table.summaries.at(m).mean;
            per_seed.push_back(r);
        }
        const EvalSummary s = summarize(per_seed, runs.front().table.summaries[m].mode);
        out << "all," << to_string(s.mode) << ',' << format_number(s.mean) << ',' << format_number(s.std) << '\n';
    }
}

}  // namespace fusiform
