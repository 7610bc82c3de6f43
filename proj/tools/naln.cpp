#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "naln/attribution.hpp"
#include "naln/errors.hpp"
#include "naln/evalstats.hpp"
#include "naln/io.hpp"
#include "naln/retrieval.hpp"
#include "naln/rng.hpp"
#include "naln/synthgen.hpp"
#include "naln/trainer.hpp"

namespace fs = std::filesystem;
using namespace naln;

namespace {

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << content;
    if (!out) throw DataError("failed writing " + path);
}

std::vector<double> read_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open score file " + path);
    std::vector<double> scores;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            scores.push_back(std::stod(line));
        } catch (const std::exception&) {
            throw FormatError("score file " + path + " has a non-numeric line: \"" + line + "\"");
        }
    }
    if (scores.empty()) throw DataError("score file " + path + " is empty");
    return scores;
}

int max_repetition(const EpochSet& s) {
    return *std::max_element(s.repetition_index.begin(), s.repetition_index.end());
}

EpochSet select_epochs(const EpochSet& in, bool held_out) {
    const int max_rep = max_repetition(in);
    if (max_rep == 0) {
        if (held_out)
            throw DataError("dataset has a single repetition, nothing is held out");
        return in;
    }
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < in.count(); ++i)
        if ((in.repetition_index[i] == max_rep) == held_out) rows.push_back(i);

    EpochSet out;
    out.sample_rate_hz = in.sample_rate_hz;
    const std::size_t c = in.channels(), t = in.samples();
    out.epochs = Tensor::zeros({rows.size(), c, t});
    double* dst = out.epochs.mutable_data().data();
    const double* src = in.epochs.data().data();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(src + rows[r] * c * t, src + (rows[r] + 1) * c * t, dst + r * c * t);
        out.labels.push_back(in.labels[rows[r]]);
        out.repetition_index.push_back(in.repetition_index[rows[r]]);
    }
    return out;
}

EpochSet query_epochs(const EpochSet& all, const std::string& which) {
    if (which == "held") return select_epochs(all, true);
    if (which == "all") return all;
    throw ParameterError("--queries must be \"held\" or \"all\", got \"" + which + "\"");
}

EmbeddingSet load_named_embeddings(const Manifest& m, const std::string& name) {
    auto it = m.embeddings.find(name);
    if (it == m.embeddings.end())
        throw DataError("manifest has no embedding set named \"" + name + "\"");
    return load_embedding_set(m.resolve(it->second));
}

std::string checkpoint_dir(const Manifest& m, const std::string& embedding, std::size_t i) {
    return m.resolve(m.checkpoint_dir) + "/" + embedding + "/seed" + std::to_string(i);
}

Tensor target_row(const EmbeddingSet& set, std::size_t row) {
    Tensor out = Tensor::zeros({set.dim()});
    for (std::size_t j = 0; j < set.dim(); ++j) out.mutable_data()[j] = set.vectors.at(row, j);
    return out;
}

// --- synth -----------------------------------------------------------------

struct SynthOpts {
    std::string out_dir;
    SynthConfig cfg;
    std::size_t distractors = 0;
};

void run_synth(const SynthOpts& o) {
    o.cfg.validate();
    fs::create_directories(o.out_dir);
    fs::create_directories(o.out_dir + "/checkpoints");
    fs::create_directories(o.out_dir + "/reports");

    SynthData data = generate(o.cfg);
    save_epoch_set(data.epochs, o.out_dir + "/epochs.naln", o.out_dir + "/labels.naln",
                   o.out_dir + "/repetitions.naln");
    save_embedding_set(data.aligned, o.out_dir + "/aligned.naln");
    save_embedding_set(data.misaligned, o.out_dir + "/misaligned.naln");

    Manifest m;
    m.epochs_path = "epochs.naln";
    m.labels_path = "labels.naln";
    m.repetitions_path = "repetitions.naln";
    m.embeddings = {{"aligned", "aligned.naln"}, {"misaligned", "misaligned.naln"}};
    m.sample_rate_hz = o.cfg.sample_rate_hz;
    for (std::size_t c = 0; c < o.cfg.channels; ++c) m.channel_names.push_back("C" + std::to_string(c));
    m.training.seed = o.cfg.seed;
    m.checkpoint_dir = "checkpoints";
    m.report_dir = "reports";

    if (o.distractors > 0) {
        Rng rng(o.cfg.seed ^ 0x5eed0d15ULL);
        EmbeddingSet extra;
        extra.vectors = Tensor::zeros({o.distractors, o.cfg.embed_dim});
        for (std::size_t i = 0; i < o.distractors; ++i) {
            extra.ids.push_back(static_cast<int>(i));
            double norm = 0.0;
            std::vector<double> v(o.cfg.embed_dim);
            for (double& x : v) {
                x = rng.normal();
                norm += x * x;
            }
            norm = std::sqrt(norm);
            for (std::size_t j = 0; j < o.cfg.embed_dim; ++j)
                extra.vectors.mutable_data()[i * o.cfg.embed_dim + j] = v[j] / norm;
        }
        save_embedding_set(extra, o.out_dir + "/distractors.naln");
        m.embeddings["distractors"] = "distractors.naln";
    }

    save_manifest(m, o.out_dir + "/manifest.json");
    std::cout << "wrote " << o.out_dir << "/manifest.json: " << data.epochs.count() << " epochs, "
              << o.cfg.n_classes << " classes, " << o.cfg.embed_dim << "-d embeddings\n";
}

// --- train -------------------------------------------------------------------

struct TrainOpts {
    std::string manifest_path;
    std::string embedding = "aligned";
    std::string family = "nice_conv";
    std::string holdout = "last";
    std::size_t seeds = 1;
    std::optional<std::uint64_t> base_seed;
    EncoderConfig geometry;  // filter/kernel fields only; io fields filled later
    std::optional<double> lr, temperature, val_fraction;
    std::optional<std::size_t> batch, epochs, patience;
    std::optional<std::size_t> embed_dim;
};

void run_train(const TrainOpts& o) {
    Manifest m = load_manifest(o.manifest_path);
    EpochSet all = load_epoch_set(m);
    EmbeddingSet emb = load_named_embeddings(m, o.embedding);

    EpochSet train_set = all;
    if (o.holdout == "last")
        train_set = select_epochs(all, false);
    else if (o.holdout != "none")
        throw ParameterError("--holdout must be \"last\" or \"none\", got \"" + o.holdout + "\"");

    TrainConfig tc = m.training;
    if (o.lr) tc.learning_rate = *o.lr;
    if (o.temperature) tc.temperature = *o.temperature;
    if (o.val_fraction) tc.val_fraction = *o.val_fraction;
    if (o.batch) tc.batch_size = *o.batch;
    if (o.epochs) tc.max_epochs = *o.epochs;
    if (o.patience) tc.patience = *o.patience;

    EncoderConfig enc = o.geometry;
    enc.family = family_from_name(o.family);
    enc.input_channels = all.channels();
    enc.input_samples = all.samples();
    enc.embed_dim = o.embed_dim ? *o.embed_dim : emb.dim();

    const std::uint64_t base = o.base_seed ? *o.base_seed : tc.seed;
    std::string report = "training report\n";
    report += "embedding: " + o.embedding + "\n";
    report += "family: " + o.family + "\n";
    report += "seeds: " + std::to_string(o.seeds) + "\n";
    std::vector<double> best_vals;
    for (std::size_t i = 0; i < o.seeds; ++i) {
        enc.seed = base + i;
        tc.seed = base + i;
        auto [params, fit_report] = fit(enc, train_set, emb, tc);
        const std::string dir = checkpoint_dir(m, o.embedding, i);
        fs::create_directories(dir);
        save_checkpoint(dir, params);

        report += "seed " + std::to_string(i) + ": epochs_run " +
                  std::to_string(fit_report.stopped_epoch) + " best_val " +
                  fmt("%.6f", fit_report.best_val_loss) + " final_train " +
                  fmt("%.6f", fit_report.train_loss.empty() ? 0.0 : fit_report.train_loss.back()) +
                  "\n";
        best_vals.push_back(fit_report.best_val_loss);
    }
    auto [mean, se] = summarize(best_vals);
    report += "best_val mean " + fmt("%.6f", mean) + " se " + fmt("%.6f", se) + "\n";

    fs::create_directories(m.resolve(m.report_dir));
    const std::string path = m.resolve(m.report_dir) + "/train_" + o.embedding + ".txt";
    write_text(path, report);
    std::cout << report;
}

// --- evaluate ----------------------------------------------------------------

struct EvalOpts {
    std::string manifest_path;
    std::string embedding = "aligned";
    std::string database = "test";
    std::string queries = "held";
    std::string distractors = "distractors";
    std::size_t seeds = 1;
    std::vector<std::size_t> ks;
};

void run_evaluate(const EvalOpts& o) {
    Manifest m = load_manifest(o.manifest_path);
    EpochSet all = load_epoch_set(m);
    EmbeddingSet emb = load_named_embeddings(m, o.embedding);
    EpochSet queries = query_epochs(all, o.queries);

    Index index;
    if (o.database == "test") {
        index = build_index(emb);
    } else if (o.database == "extended") {
        EmbeddingSet extra = load_named_embeddings(m, o.distractors);
        const int offset = *std::max_element(emb.ids.begin(), emb.ids.end()) + 1;
        for (int& id : extra.ids) id += offset;
        index = build_index(merge_embedding_sets(emb, extra));
    } else {
        throw ParameterError("--database must be \"test\" or \"extended\", got \"" + o.database +
                             "\"");
    }

    std::vector<std::size_t> ks = o.ks.empty() ? std::vector<std::size_t>{1, 5} : o.ks;
    std::string report = "evaluation report\n";
    report += "embedding: " + o.embedding + "\n";
    report += "database: " + o.database + " (" + std::to_string(index.size()) + " entries)\n";
    report += "queries: " + std::to_string(queries.count()) + "\n";

    std::vector<std::vector<double>> per_k(ks.size());
    for (std::size_t i = 0; i < o.seeds; ++i) {
        EncoderParams params = load_checkpoint(checkpoint_dir(m, o.embedding, i));
        EmbeddingSet encoded;
        encoded.vectors = encode_batch(params, queries.epochs);
        for (std::size_t q = 0; q < queries.count(); ++q)
            encoded.ids.push_back(static_cast<int>(q));
        RetrievalReport r = topk_accuracy(index, encoded, queries.labels, ks);
        report += "seed " + std::to_string(i) + "\n" + report_to_text(r);
        for (std::size_t k = 0; k < ks.size(); ++k) per_k[k].push_back(r.accuracy[k]);
    }
    for (std::size_t k = 0; k < ks.size(); ++k) {
        auto [mean, se] = summarize(per_k[k]);
        report += "top_" + std::to_string(ks[k]) + " mean " + fmt("%.6f", mean) + " se " +
                  fmt("%.6f", se) + "\n";
    }

    fs::create_directories(m.resolve(m.report_dir));
    const std::string stem = m.resolve(m.report_dir) + "/evaluate_" + o.embedding + "_" + o.database;
    write_text(stem + ".txt", report);
    for (std::size_t k = 0; k < ks.size(); ++k) {
        std::string scores;
        for (double a : per_k[k]) scores += fmt("%.6f", a) + "\n";
        write_text(stem + "_top" + std::to_string(ks[k]) + ".scores", scores);
    }
    std::cout << report;
}

// --- attribute ---------------------------------------------------------------

struct AttrOpts {
    std::string manifest_path;
    std::string embedding = "aligned";
    std::string queries = "held";
    std::size_t seeds = 1;
    double percentile = 99.0;
};

void run_attribute(const AttrOpts& o) {
    Manifest m = load_manifest(o.manifest_path);
    EpochSet all = load_epoch_set(m);
    EmbeddingSet emb = load_named_embeddings(m, o.embedding);
    EpochSet queries = query_epochs(all, o.queries);

    std::unordered_map<int, std::size_t> row_of;
    for (std::size_t i = 0; i < emb.count(); ++i) row_of[emb.ids[i]] = i;

    const BandSpec bands = BandSpec::eeg_default(m.sample_rate_hz / 2.0);
    std::vector<std::string> band_names;
    for (const Band& b : bands.bands) band_names.push_back(b.name);

    std::vector<std::vector<AttributionMap>> groups;
    std::string bands_csv = "seed";
    for (const std::string& n : band_names) bands_csv += "," + n;
    bands_csv += "\n";

    for (std::size_t i = 0; i < o.seeds; ++i) {
        EncoderParams params = load_checkpoint(checkpoint_dir(m, o.embedding, i));
        std::vector<AttributionMap> maps;
        for (std::size_t q = 0; q < queries.count(); ++q) {
            auto it = row_of.find(queries.labels[q]);
            if (it == row_of.end())
                throw DataError("no embedding for label " + std::to_string(queries.labels[q]));
            maps.push_back(
                gradcam(params, queries.epoch(q), target_row(emb, it->second), queries.labels[q]));
        }

        // per-channel spectra averaged, then integrated into band fractions
        std::vector<double> mean_fractions(band_names.size(), 0.0);
        std::size_t used = 0;
        for (const AttributionMap& map : maps) {
            if (map.zero_gradient) continue;
            const std::size_t c = map.values.dim(0), t = map.values.dim(1);
            PSD avg;
            for (std::size_t ci = 0; ci < c; ++ci) {
                std::vector<double> row(t);
                for (std::size_t ti = 0; ti < t; ++ti) row[ti] = map.values.at(ci, ti);
                PSD psd = periodogram(row, m.sample_rate_hz);
                if (ci == 0) {
                    avg = psd;
                } else {
                    for (std::size_t k = 0; k < avg.power.size(); ++k) avg.power[k] += psd.power[k];
                }
            }
            for (double& p : avg.power) p /= static_cast<double>(c);
            auto fractions = band_energies(avg, bands);
            for (std::size_t b = 0; b < fractions.size(); ++b)
                mean_fractions[b] += fractions[b].second;
            ++used;
        }
        if (used == 0) throw DegenerateInputError("all attribution maps in seed " +
                                                  std::to_string(i) + " are zero");
        bands_csv += std::to_string(i);
        for (double f : mean_fractions) bands_csv += "," + fmt("%.6f", f / double(used));
        bands_csv += "\n";

        groups.push_back(std::move(maps));
    }

    std::vector<std::size_t> hist = threshold_histogram(groups, o.percentile);
    std::vector<AttributionMap> pooled;
    for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
    std::vector<double> electrodes = electrode_aggregate(pooled);

    fs::create_directories(m.resolve(m.report_dir));
    const std::string stem = m.resolve(m.report_dir) + "/attr_";
    write_text(stem + "hist_" + o.embedding + ".csv", histogram_to_csv(hist));
    write_text(stem + "electrodes_" + o.embedding + ".csv",
               electrode_scores_to_text(m.channel_names, electrodes));
    write_text(stem + "bands_" + o.embedding + ".csv", bands_csv);

    std::size_t total = 0, early = 0;
    const std::size_t cutoff = hist.size() * 2 / 5;
    for (std::size_t t = 0; t < hist.size(); ++t) {
        total += hist[t];
        if (t < cutoff) early += hist[t];
    }
    std::cout << "attribution over " << pooled.size() << " maps (" << o.seeds << " seeds)\n";
    std::cout << "threshold exceedances: " << total << ", in first 40% of time: " << early << "\n";
}

// --- stats ---------------------------------------------------------------------

struct StatsOpts {
    std::string a_path, b_path;
    std::string bands_a, bands_b;
    std::string label_a = "a", label_b = "b";
    std::string out_path;
    bool paired = false;
};

std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_bands_csv(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open band file " + path);
    std::string header;
    if (!std::getline(in, header)) throw FormatError("band file " + path + " is empty");
    std::vector<std::string> names;
    std::size_t pos = header.find(',');
    if (pos == std::string::npos || header.substr(0, pos) != "seed")
        throw FormatError("band file " + path + " must start with a \"seed\" column");
    while (pos != std::string::npos) {
        const std::size_t next = header.find(',', pos + 1);
        names.push_back(header.substr(pos + 1, next == std::string::npos ? next : next - pos - 1));
        pos = next;
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = line.find(',');  // skip the seed column
        while (start != std::string::npos) {
            const std::size_t next = line.find(',', start + 1);
            try {
                row.push_back(std::stod(
                    line.substr(start + 1, next == std::string::npos ? next : next - start - 1)));
            } catch (const std::exception&) {
                throw FormatError("band file " + path + " has a non-numeric entry");
            }
            start = next;
        }
        if (row.size() != names.size())
            throw FormatError("band file " + path + " row width does not match its header");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("band file " + path + " has no data rows");
    return {names, rows};
}

void run_stats(const StatsOpts& o) {
    std::string text;
    if (!o.bands_a.empty() || !o.bands_b.empty()) {
        if (o.bands_a.empty() || o.bands_b.empty())
            throw ParameterError("band comparison needs both --bands-a and --bands-b");
        auto [names_a, rows_a] = read_bands_csv(o.bands_a);
        auto [names_b, rows_b] = read_bands_csv(o.bands_b);
        if (names_a != names_b) throw DataError("band files disagree on band names");
        text = band_table_to_text(band_compare(rows_a, rows_b, names_a));
    } else {
        if (o.a_path.empty() || o.b_path.empty())
            throw ParameterError("stats needs --a and --b score files (or --bands-a/--bands-b)");
        std::vector<double> a = read_scores(o.a_path);
        std::vector<double> b = read_scores(o.b_path);
        text = results_table({{o.label_a, a}, {o.label_b, b}});
        if (o.paired)
            text += ttest_to_text("paired " + o.label_a + " vs " + o.label_b, paired_ttest(a, b));
        else
            text += ttest_to_text("welch " + o.label_a + " vs " + o.label_b, welch_ttest(a, b));
    }
    if (!o.out_path.empty()) write_text(o.out_path, text);
    std::cout << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"brain-signal to image-embedding pipeline"};
    app.require_subcommand(1);

    SynthOpts synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a seeded synthetic dataset");
    synth_cmd->add_option("--out", synth.out_dir, "output directory")->required();
    synth_cmd->add_option("--classes", synth.cfg.n_classes, "number of stimulus classes");
    synth_cmd->add_option("--embed-dim", synth.cfg.embed_dim, "embedding dimension");
    synth_cmd->add_option("--channels", synth.cfg.channels, "recording channels");
    synth_cmd->add_option("--samples", synth.cfg.samples, "samples per epoch");
    synth_cmd->add_option("--rate", synth.cfg.sample_rate_hz, "sample rate in Hz");
    synth_cmd->add_option("--noise", synth.cfg.noise_std, "epoch noise standard deviation");
    synth_cmd->add_option("--gamma", synth.cfg.misalignment_strength,
                          "misalignment blend weight in [0,1]");
    synth_cmd->add_option("--repetitions", synth.cfg.n_repetitions, "repetitions per class");
    synth_cmd->add_option("--embed-noise", synth.cfg.embed_noise_std,
                          "embedding noise standard deviation");
    synth_cmd->add_option("--seed", synth.cfg.seed, "generator seed");
    synth_cmd->add_option("--distractors", synth.distractors,
                          "extra distractor embeddings for extended search");

    TrainOpts train;
    double lr = 0, temperature = 0, val_fraction = 0;
    std::size_t batch = 0, epochs = 0, patience = 0, embed_dim = 0;
    std::uint64_t base_seed = 0;
    CLI::App* train_cmd = app.add_subcommand("train", "fit encoders against an embedding set");
    train_cmd->add_option("--manifest", train.manifest_path, "manifest path")->required();
    train_cmd->add_option("--embedding", train.embedding, "embedding set name");
    train_cmd->add_option("--family", train.family,
                          "encoder family: nice_conv, eegnet_conv, residual_mlp");
    train_cmd->add_option("--holdout", train.holdout, "\"last\" repetition or \"none\"");
    train_cmd->add_option("--seeds", train.seeds, "number of seeded fits");
    auto* opt_base = train_cmd->add_option("--base-seed", base_seed, "first seed");
    auto* opt_lr = train_cmd->add_option("--lr", lr, "learning rate");
    auto* opt_temp = train_cmd->add_option("--temperature", temperature, "loss temperature");
    auto* opt_val = train_cmd->add_option("--val-fraction", val_fraction, "validation fraction");
    auto* opt_batch = train_cmd->add_option("--batch", batch, "batch size");
    auto* opt_epochs = train_cmd->add_option("--epochs", epochs, "epoch cap");
    auto* opt_patience = train_cmd->add_option("--patience", patience, "early-stop patience");
    auto* opt_dim = train_cmd->add_option("--embed-dim", embed_dim, "override embedding dim");
    train_cmd->add_option("--temporal-kernel", train.geometry.temporal_kernel, "temporal kernel");
    train_cmd->add_option("--temporal-filters", train.geometry.temporal_filters, "temporal filters");
    train_cmd->add_option("--spatial-filters", train.geometry.spatial_filters, "spatial filters");
    train_cmd->add_option("--pool", train.geometry.pool_width, "pool width");
    train_cmd->add_option("--second-kernel", train.geometry.second_kernel, "second conv kernel");
    train_cmd->add_option("--second-filters", train.geometry.second_filters, "second conv filters");
    train_cmd->add_option("--hidden", train.geometry.hidden_width, "mlp hidden width");
    train_cmd->add_option("--depth", train.geometry.depth, "mlp residual blocks");

    EvalOpts eval;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "score retrieval from trained checkpoints");
    eval_cmd->add_option("--manifest", eval.manifest_path, "manifest path")->required();
    eval_cmd->add_option("--embedding", eval.embedding, "embedding set name");
    eval_cmd->add_option("--database", eval.database, "\"test\" or \"extended\"");
    eval_cmd->add_option("--queries", eval.queries, "\"held\" or \"all\" epochs");
    eval_cmd->add_option("--distractors", eval.distractors,
                         "embedding set merged in for extended search");
    eval_cmd->add_option("--seeds", eval.seeds, "checkpoints to evaluate");
    eval_cmd->add_option("--k", eval.ks, "retrieval cutoffs, repeatable");

    AttrOpts attr;
    CLI::App* attr_cmd = app.add_subcommand("attribute", "temporal/spectral/spatial attributions");
    attr_cmd->add_option("--manifest", attr.manifest_path, "manifest path")->required();
    attr_cmd->add_option("--embedding", attr.embedding, "embedding set name");
    attr_cmd->add_option("--queries", attr.queries, "\"held\" or \"all\" epochs");
    attr_cmd->add_option("--seeds", attr.seeds, "checkpoints to analyze");
    attr_cmd->add_option("--percentile", attr.percentile, "threshold percentile");

    StatsOpts stats;
    CLI::App* stats_cmd = app.add_subcommand("stats", "compare score or band files");
    stats_cmd->add_option("--a", stats.a_path, "first score file, one value per line");
    stats_cmd->add_option("--b", stats.b_path, "second score file");
    stats_cmd->add_option("--bands-a", stats.bands_a, "first band CSV from attribute");
    stats_cmd->add_option("--bands-b", stats.bands_b, "second band CSV from attribute");
    stats_cmd->add_option("--label-a", stats.label_a, "first condition name");
    stats_cmd->add_option("--label-b", stats.label_b, "second condition name");
    stats_cmd->add_option("--out", stats.out_path, "also write the table here");
    stats_cmd->add_flag("--paired", stats.paired, "paired instead of unpaired test");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (opt_base->count()) train.base_seed = base_seed;
    if (opt_lr->count()) train.lr = lr;
    if (opt_temp->count()) train.temperature = temperature;
    if (opt_val->count()) train.val_fraction = val_fraction;
    if (opt_batch->count()) train.batch = batch;
    if (opt_epochs->count()) train.epochs = epochs;
    if (opt_patience->count()) train.patience = patience;
    if (opt_dim->count()) train.embed_dim = embed_dim;

    try {
        if (*synth_cmd) run_synth(synth);
        if (*train_cmd) run_train(train);
        if (*eval_cmd) run_evaluate(eval);
        if (*attr_cmd) run_attribute(attr);
        if (*stats_cmd) run_stats(stats);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
