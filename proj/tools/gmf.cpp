#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gmf/pipeline.hpp"

using namespace gmf;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string work_dir;
    std::string preset = "desk";
    int threads = 1;
};

PipelineConfig resolve_config(const CommonOpts& opts) {
    PipelineConfig cfg = opts.preset == "paper" ? paper_preset() : desk_preset();
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw ConfigError("cannot open config file: " + opts.config_path);
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        apply_config_json(cfg, text);
    }
    // flags > config file > preset defaults
    if (!opts.work_dir.empty()) cfg.work_dir = opts.work_dir;
    if (const char* env = std::getenv("GMF_WORK_DIR"); env && opts.work_dir.empty()) {
        cfg.work_dir = env;
    }
    cfg.threads = opts.threads;
    cfg.validate();
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "pipeline config JSON");
    cmd->add_option("--work-dir", opts.work_dir, "artifact directory");
    cmd->add_option("--preset", opts.preset, "desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--threads", opts.threads, "intra-stage parallelism");
}

void print_report(const MetricsReport& r) { std::cout << render_report_text(r); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gmf: multi-hop evidence retrieval with a gated memory scorer"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string stage_for_run;
    std::string ablation_flag;
    std::string ckpt_path;
    double gate_override = -1.0;
    int chunk_override = -1;

    for (const std::string& stage : kStageOrder) {
        CLI::App* cmd = app.add_subcommand(stage, "run the " + stage + " stage");
        add_common(cmd, opts);
        if (stage == "score") {
            cmd->add_option("--chunk-size", chunk_override, "inference chunk size");
            cmd->add_option("--gate", gate_override, "write-gate threshold");
            cmd->add_option("--checkpoint", ckpt_path, "model checkpoint (defaults to work dir)");
        }
        cmd->callback([&, stage] { stage_for_run = stage; });
    }

    CLI::App* run_all_cmd = app.add_subcommand("run-all", "run every stage in order");
    add_common(run_all_cmd, opts);
    run_all_cmd->add_option("--ablation", ablation_flag,
                            "run with one ablation flag enabled")
        ->check(CLI::IsMember({"no_bidirectional_links", "no_gate", "no_memory",
                               "random_negatives"}));

    CLI::App* ablate_cmd = app.add_subcommand("ablate", "paired full-vs-ablated run");
    add_common(ablate_cmd, opts);
    ablate_cmd->add_option("--flag", ablation_flag, "ablation flag")
        ->required()
        ->check(CLI::IsMember({"no_bidirectional_links", "no_gate", "no_memory",
                               "random_negatives"}));

    CLI::App* index_stats_cmd = app.add_subcommand("index-stats", "print index statistics");
    add_common(index_stats_cmd, opts);

    CLI::App* dump_cmd = app.add_subcommand("dump-config", "print checkpoint dimensions");
    dump_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (!stage_for_run.empty()) {
            PipelineConfig cfg = resolve_config(opts);
            if (stage_for_run == "score") {
                if (gate_override >= 0.0) cfg.gate = gate_override;
                if (chunk_override > 0) cfg.chunk_size = chunk_override;
            }
            run_stage(stage_for_run, cfg);
            if (stage_for_run == "evaluate") {
                std::ifstream in(artifacts_for(cfg.work_dir).report_text);
                std::cout << in.rdbuf();
            }
        } else if (run_all_cmd->parsed()) {
            PipelineConfig cfg = resolve_config(opts);
            if (ablation_flag == "no_bidirectional_links") cfg.no_bidirectional_links = true;
            else if (ablation_flag == "no_gate") cfg.no_gate = true;
            else if (ablation_flag == "no_memory") cfg.no_memory = true;
            else if (ablation_flag == "random_negatives") cfg.random_negatives = true;
            print_report(run_all(cfg));
        } else if (ablate_cmd->parsed()) {
            PipelineConfig cfg = resolve_config(opts);
            AblationReport rep = run_ablation(cfg, ablation_flag);
            std::cout << "=== full ===\n";
            print_report(rep.full);
            std::cout << "=== " << rep.flag << " ===\n";
            print_report(rep.ablated);
        } else if (index_stats_cmd->parsed()) {
            PipelineConfig cfg = resolve_config(opts);
            InvertedIndex index = load_index(artifacts_for(cfg.work_dir).index);
            std::size_t postings = 0;
            for (const auto& p : index.postings) postings += p.size();
            std::cout << "documents " << index.doc_count << "\n"
                      << "terms     " << index.vocab.size() << "\n"
                      << "postings  " << postings << "\n";
        } else if (dump_cmd->parsed()) {
            Checkpoint ckpt = load_checkpoint(ckpt_path);
            std::cout << "d       " << ckpt.params.config.dim << "\n"
                      << "h       " << ckpt.params.config.heads << "\n"
                      << "V       " << ckpt.vocab.size() << "\n"
                      << "max_len " << ckpt.params.config.max_len << "\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const MissingDependencyError& e) {
        std::cerr << "missing dependency: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
