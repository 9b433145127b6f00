#include "dna_tools/commands.hpp"

#include "dna/error.hpp"
#include "dna/log.hpp"
#include "dna/membank.hpp"
#include "dna/rng.hpp"
#include "dna/tensor_io.hpp"
#include "dna/text_format.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace dna::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

double pct(double fraction) { return std::round(fraction * 10000.0) / 100.0; }

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StructuralError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw StructuralError("failed writing " + path.string());
}

std::string checkpoint_id(const Checkpoint& c) { return hex64(fnv1a64(serialize(to_tensor_file(c)))); }

ordered_json report_json(const EvalReport& r) {
    ordered_json j;
    j["acc"] = pct(r.acc);
    j["ari"] = pct(r.ari);
    j["nmi"] = pct(r.nmi);
    if (r.neighbor_acc) j["neighbor_acc"] = pct(*r.neighbor_acc);
    j["k"] = r.k;
    j["seed"] = r.seed;
    return j;
}

ordered_json config_json(const RunConfig& cfg) {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : to_key_values(cfg)) j[k] = v;
    return j;
}

ordered_json optional_number(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json epoch_json(const EpochMetrics& m) {
    ordered_json j;
    j["epoch"] = m.epoch;
    j["loss"] = {{"total", m.loss.total},
                 {"dna", m.loss.dna},
                 {"alignment", m.loss.alignment},
                 {"uniformity", m.loss.uniformity},
                 {"ce", m.loss.ce}};
    j["skipped_queries"] = m.loss.skipped_queries;
    j["batches"] = m.batches;
    ordered_json audit = ordered_json::array();
    for (const auto& a : m.audit) {
        audit.push_back({{"stage", std::string(stage_name(a.stage))},
                         {"mean_size", a.mean_size},
                         {"fine_accuracy", optional_number(a.fine_accuracy)}});
    }
    j["audit"] = audit;
    j["clustering_objective"] = m.clustering_objective;
    j["queries_with_positives"] = m.queries_with_positives;
    j["k_clamped"] = m.k_clamped;
    j["bank_version"] = m.bank_version;
    if (m.eval) j["eval"] = report_json(*m.eval);
    return j;
}

KMeansSettings kmeans_settings(const TrainConfig& tc) {
    KMeansSettings s;
    s.restarts = tc.kmeans_restarts;
    return s;
}

std::optional<double> positive_accuracy(const EpochMetrics& m) {
    for (const auto& a : m.audit)
        if (a.stage == Stage::rank) return a.fine_accuracy;
    return std::nullopt;
}

std::string csv_number(const std::optional<double>& v) { return v ? text::format_double(*v) : std::string(); }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto part : text::split(s, ',')) {
        const auto t = text::trim(part);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

ordered_json error_json(const std::string& type, const std::string& message, int code) {
    return {{"error", {{"type", type}, {"message", message}, {"exit_code", code}}}};
}

}  // namespace

RunConfig resolve_config(const fs::path& config_path, const Overrides& ov) {
    RunConfig cfg = load_config(config_path);
    if (ov.seed) cfg.train.seed = *ov.seed;
    if (ov.lambda_ce) cfg.train.lambda_ce = *ov.lambda_ce;
    if (ov.k) cfg.train.k = *ov.k;
    if (ov.rank_epochs) cfg.train.rank_epochs = *ov.rank_epochs;
    if (ov.rank_by_abs) cfg.train.rank_by_abs = true;
    cfg.data.validate();
    cfg.train.validate();
    return cfg;
}

Dataset cmd_generate(const fs::path& config_path, const fs::path& out_path, std::optional<std::uint64_t> seed) {
    RunConfig cfg = load_config(config_path);
    if (seed) cfg.data.seed = *seed;
    Dataset ds = generate(cfg.data);
    write_dataset(ds, out_path);
    log::info("wrote " + std::to_string(ds.train.size()) + " train + " + std::to_string(ds.test.size()) +
              " test samples to " + out_path.string());
    return ds;
}

std::string cmd_train(const RunConfig& cfg, const fs::path& dataset_path, const fs::path& out_dir) {
    cfg.train.validate();
    const Dataset ds = read_dataset(dataset_path);
    fs::create_directories(out_dir);

    std::optional<Evaluator> evaluator;
    if (ds.test.has_fine_labels()) {
        evaluator.emplace(ds, cfg.train.seed, kmeans_settings(cfg.train));
    } else {
        log::warn("test split has no fine labels; per-epoch evaluation is skipped");
    }

    std::ofstream metrics(out_dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
    std::ofstream audit(out_dir / "neighbor_audit.csv", std::ios::binary | std::ios::trunc);
    if (!metrics || !audit) throw StructuralError("cannot write into " + out_dir.string());
    audit << "epoch,stage,mean_size,fine_accuracy\n";

    RunCallbacks cb;
    cb.on_pretrained = [&](const RunState& s) {
        write_checkpoint(make_checkpoint(s, cfg, "pretrain"), out_dir / "pretrain.ckpt");
        write_checkpoint(make_checkpoint(s, cfg, "pretrain"), out_dir / "last.ckpt");
    };
    cb.on_epoch = [&](const RunState& s, const EpochMetrics& m) {
        metrics << epoch_json(m).dump() << '\n';
        metrics.flush();
        for (const auto& a : m.audit) {
            audit << m.epoch << ',' << stage_name(a.stage) << ',' << text::format_double(a.mean_size) << ','
                  << csv_number(a.fine_accuracy) << '\n';
        }
        audit.flush();
        write_checkpoint(make_checkpoint(s, cfg, "train"), out_dir / "last.ckpt");
        if (m.eval) {
            log::info("epoch " + std::to_string(m.epoch) + ": loss " + text::format_double(m.loss.total) +
                      ", acc " + text::format_double(pct(m.eval->acc)));
        }
    };

    const RunResult res = run(cfg, CoarseView(ds.train, ds.num_coarse), evaluator ? &*evaluator : nullptr, cb);
    write_checkpoint(res.final, out_dir / "final.ckpt");

    ordered_json summary;
    summary["config"] = config_json(cfg);
    summary["dataset"] = {{"train", ds.train.size()},
                          {"test", ds.test.size()},
                          {"num_coarse", ds.num_coarse},
                          {"num_fine", ds.num_fine}};
    summary["epochs"] = res.history.size();
    summary["pretrain"] = res.pretrain_eval ? report_json(*res.pretrain_eval) : ordered_json(nullptr);
    summary["final"] =
        (!res.history.empty() && res.history.back().eval) ? report_json(*res.history.back().eval)
                                                          : (res.pretrain_eval ? report_json(*res.pretrain_eval)
                                                                               : ordered_json(nullptr));
    ordered_json hist = ordered_json::array();
    for (const auto& m : res.history) {
        ordered_json h;
        h["epoch"] = m.epoch;
        h["loss"] = m.loss.total;
        h["positives_mean_size"] = m.audit.empty() ? 0.0 : m.audit.back().mean_size;
        h["positives_fine_accuracy"] = optional_number(positive_accuracy(m));
        h["acc"] = m.eval ? ordered_json(pct(m.eval->acc)) : ordered_json(nullptr);
        hist.push_back(h);
    }
    summary["history"] = hist;
    summary["pretrain_checkpoint_id"] = checkpoint_id(res.pretrained);
    summary["final_checkpoint_id"] = checkpoint_id(res.final);

    const std::string text = summary.dump(2) + "\n";
    write_text(out_dir / "summary.json", text);
    return text;
}

const std::vector<AblationVariant>& ablation_ladder() {
    static const std::vector<AblationVariant> ladder{
        {"nncl_single_positive",
         {{"k", "1"}, {"label_filter", "false"}, {"reciprocal_filter", "false"}, {"rank_epochs", "0"},
          {"lambda_ce", "0"}}},
        {"multi_positive",
         {{"label_filter", "false"}, {"reciprocal_filter", "false"}, {"rank_epochs", "0"}, {"lambda_ce", "0"}}},
        {"coarse_ce", {{"label_filter", "false"}, {"reciprocal_filter", "false"}, {"rank_epochs", "0"}}},
        {"label", {{"label_filter", "true"}, {"reciprocal_filter", "false"}, {"rank_epochs", "0"}}},
        {"reciprocal", {{"label_filter", "true"}, {"reciprocal_filter", "true"}, {"rank_epochs", "0"}}},
        {"rank", {{"label_filter", "true"}, {"reciprocal_filter", "true"}}},
    };
    return ladder;
}

std::vector<AblationVariant> select_variants(const std::vector<std::string>& names) {
    const auto& ladder = ablation_ladder();
    if (names.empty()) return ladder;
    std::vector<bool> chosen(ladder.size(), false);
    for (std::string name : names) {
        if (name == "knn_raw") name = "coarse_ce";
        if (name == "full" || name == "dna") name = "rank";
        bool found = false;
        for (std::size_t i = 0; i < ladder.size(); ++i) {
            if (ladder[i].id == name) chosen[i] = found = true;
        }
        if (!found) throw ConfigError("unknown ablation variant '" + name + "'");
    }
    std::vector<AblationVariant> out;
    for (std::size_t i = 0; i < ladder.size(); ++i)
        if (chosen[i]) out.push_back(ladder[i]);
    return out;
}

std::uint64_t repeat_seed(std::uint64_t base, std::size_t r) { return mix_seed(base, r); }

bool AblationRow::failed() const {
    for (const auto& r : runs)
        if (!r.ok) return true;
    return false;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& base, const fs::path& dataset_path, const fs::path& out_dir,
                                    const std::vector<AblationVariant>& variants, std::size_t repeats) {
    if (repeats == 0) throw ConfigError("repeats must be >= 1");
    const Dataset ds = read_dataset(dataset_path);
    if (!ds.test.has_fine_labels()) throw StructuralError("ablation needs fine labels on the test split");
    fs::create_directories(out_dir);
    const CoarseView view(ds.train, ds.num_coarse);

    std::vector<AblationRow> rows;
    for (const auto& v : variants) {
        AblationRow row{v, {}};
        for (std::size_t r = 0; r < repeats; ++r) {
            AblationRun ar;
            ar.seed = repeat_seed(base.train.seed, r);
            try {
                RunConfig cfg = base;
                for (const auto& [k, val] : v.delta) set_config_value(cfg, k, val);
                cfg.train.seed = ar.seed;
                const Evaluator ev(ds, ar.seed, kmeans_settings(cfg.train));
                const RunResult res = run(cfg, view, &ev);
                const EvalReport fin = res.history.empty() ? *res.pretrain_eval : *res.history.back().eval;
                ar.acc = fin.acc;
                ar.ari = fin.ari;
                ar.nmi = fin.nmi;
                ar.pretrain_acc = res.pretrain_eval->acc;
                if (!res.history.empty()) ar.neighbor_acc = positive_accuracy(res.history.front());
                ar.ok = true;
            } catch (const std::exception& e) {
                ar.error = e.what();
                log::error("variant " + v.id + " seed " + std::to_string(ar.seed) + " failed: " + e.what());
            }
            log::info("variant " + v.id + " repeat " + std::to_string(r) +
                      (ar.ok ? ": acc " + text::format_double(pct(ar.acc)) : ": failed"));
            row.runs.push_back(ar);
        }
        rows.push_back(std::move(row));
    }

    std::ostringstream csv;
    csv << "variant,status,runs,acc,ari,nmi,neighbor_acc,pretrain_acc\n";
    ordered_json doc;
    doc["base_seed"] = base.train.seed;
    doc["repeats"] = repeats;
    ordered_json seeds = ordered_json::array();
    for (std::size_t r = 0; r < repeats; ++r) seeds.push_back(repeat_seed(base.train.seed, r));
    doc["seeds"] = seeds;
    doc["config"] = config_json(base);
    ordered_json jrows = ordered_json::array();
    for (const auto& row : rows) {
        double acc = 0, ari = 0, nmi = 0, pre = 0, nacc = 0;
        std::size_t ok = 0, nacc_count = 0;
        ordered_json jruns = ordered_json::array();
        for (const auto& r : row.runs) {
            ordered_json jr;
            jr["seed"] = r.seed;
            jr["ok"] = r.ok;
            if (r.ok) {
                jr["acc"] = pct(r.acc);
                jr["ari"] = pct(r.ari);
                jr["nmi"] = pct(r.nmi);
                jr["neighbor_acc"] = r.neighbor_acc ? ordered_json(pct(*r.neighbor_acc)) : ordered_json(nullptr);
                jr["pretrain_acc"] = pct(r.pretrain_acc);
                acc += r.acc;
                ari += r.ari;
                nmi += r.nmi;
                pre += r.pretrain_acc;
                ++ok;
                if (r.neighbor_acc) {
                    nacc += *r.neighbor_acc;
                    ++nacc_count;
                }
            } else {
                jr["error"] = r.error;
            }
            jruns.push_back(jr);
        }
        const std::string status = row.failed() ? "failed" : "ok";
        ordered_json jrow;
        jrow["variant"] = row.variant.id;
        ordered_json delta = ordered_json::object();
        for (const auto& [k, val] : row.variant.delta) delta[k] = val;
        jrow["delta"] = delta;
        jrow["status"] = status;
        csv << row.variant.id << ',' << status << ',' << ok;
        if (ok > 0) {
            const double n = static_cast<double>(ok);
            const double mean_nacc = nacc_count > 0 ? pct(nacc / static_cast<double>(nacc_count)) : 0.0;
            jrow["mean"] = {{"acc", pct(acc / n)},
                            {"ari", pct(ari / n)},
                            {"nmi", pct(nmi / n)},
                            {"neighbor_acc", nacc_count > 0 ? ordered_json(mean_nacc) : ordered_json(nullptr)},
                            {"pretrain_acc", pct(pre / n)}};
            csv << ',' << text::format_double(pct(acc / n)) << ',' << text::format_double(pct(ari / n)) << ','
                << text::format_double(pct(nmi / n)) << ','
                << (nacc_count > 0 ? text::format_double(mean_nacc) : std::string()) << ','
                << text::format_double(pct(pre / n));
        } else {
            jrow["mean"] = nullptr;
            csv << ",,,,,";
        }
        csv << '\n';
        jrow["runs"] = jruns;
        jrows.push_back(jrow);
    }
    doc["rows"] = jrows;
    write_text(out_dir / "ablation.csv", csv.str());
    write_text(out_dir / "ablation.json", doc.dump(2) + "\n");
    return rows;
}

std::string cmd_eval(const fs::path& checkpoint_path, const fs::path& dataset_path,
                     std::optional<std::uint64_t> seed) {
    const TensorFile file = read_tensor_file(checkpoint_path);
    const Checkpoint ckpt = checkpoint_from(file);
    const Dataset ds = read_dataset(dataset_path);
    if (!ds.test.has_fine_labels()) {
        throw StructuralError("the dataset's test split has no fine labels; acc/ari/nmi cannot be computed");
    }
    if (static_cast<std::size_t>(ds.test.x.cols()) != ckpt.query.input_dim()) {
        throw StructuralError("checkpoint expects " + std::to_string(ckpt.query.input_dim()) +
                              "-dimensional inputs but the dataset has " + std::to_string(ds.test.x.cols()));
    }
    const std::uint64_t s = seed.value_or(ckpt.config.train.seed);
    const Evaluator ev(ds, s, kmeans_settings(ckpt.config.train));
    EvalReport rep = ev.evaluate(ckpt.query);

    if (ds.train.has_fine_labels() && ds.train.size() > 0) {
        // Test queries retrieve their k nearest training samples, keyed by
        // the momentum encoder as in the bank.
        const Matrix keys = forward(ckpt.momentum, ds.train.x).embedding;
        const Matrix queries = forward(ckpt.query, ds.test.x).embedding;
        std::vector<IndexList> sets(ds.test.size());
        bool clamped = false;
        for (Index i = 0; i < ds.test.size(); ++i) {
            sets[i] = topk_neighbors(keys, std::nullopt, row_span(queries, static_cast<Eigen::Index>(i)),
                                     ckpt.config.train.k, &clamped);
        }
        rep.neighbor_acc = neighbor_accuracy(sets, ds.test.fine, ds.train.fine);
    }

    ordered_json j = report_json(rep);
    j["checkpoint_id"] = hex64(fnv1a64(serialize(file)));
    return j.dump(2) + "\n";
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fine-grained category discovery from coarse labels (DNA)", "dna"};
    app.require_subcommand(1);

    std::string config_path, dataset_path, out_path, checkpoint_path, variants;
    std::optional<std::uint64_t> seed;
    std::optional<double> lambda_ce;
    std::optional<std::size_t> k, rank_epochs;
    bool rank_by_abs = false;
    std::size_t repeats = 3;

    auto* gen = app.add_subcommand("generate", "Generate a synthetic hierarchical dataset");
    gen->add_option("--config", config_path, "Config file")->required();
    gen->add_option("--out", out_path, "Output dataset file")->required();
    gen->add_option("--seed", seed, "Data seed (overrides data_seed)");

    const auto add_train_flags = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Config file")->required();
        sub->add_option("--dataset", dataset_path, "Dataset file")->required();
        sub->add_option("--out", out_path, "Output directory")->required();
        sub->add_option("--seed", seed, "Training seed");
        sub->add_option("--lambda-ce", lambda_ce, "Weight of the coarse cross-entropy term");
        sub->add_option("--k", k, "Neighbors retrieved per query");
        sub->add_option("--rank-epochs", rank_epochs, "Epochs with the rank filter active");
        sub->add_flag("--rank-by-abs", rank_by_abs, "Rank dimensions by magnitude");
    };
    auto* train = app.add_subcommand("train", "Pretrain and train on a dataset");
    add_train_flags(train);
    auto* ablate = app.add_subcommand("ablate", "Run the ablation ladder");
    add_train_flags(ablate);
    ablate->add_option("--variants", variants, "Comma-separated variant ids (default: all)");
    ablate->add_option("--repeats", repeats, "Seeds per variant")->check(CLI::PositiveNumber);

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset's test split");
    eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    eval->add_option("--dataset", dataset_path, "Dataset file")->required();
    eval->add_option("--seed", seed, "K-Means seed (default: the checkpoint's seed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << error_json("usage", e.what(), kUsage).dump() << '\n';
        return kUsage;
    }

    try {
        const Overrides ov{seed, lambda_ce, k, rank_epochs, rank_by_abs};
        if (*gen) {
            cmd_generate(config_path, out_path, seed);
        } else if (*train) {
            cmd_train(resolve_config(config_path, ov), dataset_path, out_path);
        } else if (*ablate) {
            const auto rows =
                cmd_ablate(resolve_config(config_path, ov), dataset_path, out_path, select_variants(split_list(variants)),
                           repeats);
            for (const auto& r : rows)
                if (r.failed()) return kPartialAblation;
        } else if (*eval) {
            out << cmd_eval(checkpoint_path, dataset_path, seed);
        }
    } catch (const NumericError& e) {
        err << error_json("numeric", e.what(), kNumeric).dump() << '\n';
        return kNumeric;
    } catch (const ConfigError& e) {
        err << error_json("config", e.what(), kUsage).dump() << '\n';
        return kUsage;
    } catch (const ParseError& e) {
        err << error_json("parse", e.what(), kUsage).dump() << '\n';
        return kUsage;
    } catch (const StructuralError& e) {
        err << error_json("structural", e.what(), kUsage).dump() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << error_json("io", e.what(), kUsage).dump() << '\n';
        return kUsage;
    }
    return kOk;
}

}  // namespace dna::cli
