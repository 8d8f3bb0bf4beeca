#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gmf/inference_eval.hpp"
#include "gmf/synthgen.hpp"
#include "gmf/training.hpp"

namespace gmf {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a stage's upstream artifact is missing; the message names the
// stage to run first.
struct MissingDependencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PipelineConfig {
    std::string work_dir = "work";

    SynthSpec synth;

    int n_kwm = 10;
    int n_tfidf = 5;

    int dim = 32;
    int heads = 4;
    int max_len = 128;
    std::uint64_t model_seed = 1;

    TrainConfig ranker_train;  // pointwise baseline for mining
    TrainConfig train;
    double dev_fraction = 0.2;  // train slice held out for checkpoint selection

    int n_retri = 4;
    double h_d = 0.5;
    int chunk_size = 16;
    double gate = 0.2;

    bool no_bidirectional_links = false;
    bool no_gate = false;
    bool no_memory = false;
    bool random_negatives = false;

    int threads = 1;

    void validate() const;
};

PipelineConfig desk_preset();
// The published hyper-parameter set: d=1024, h=16, N_retri=8, h_d=0.025,
// lr 1e-5, batch 6, 2 epochs. Far too large to train at desk scale.
PipelineConfig paper_preset();

PipelineConfig config_from_json_file(const std::string& path);
void apply_config_json(PipelineConfig& cfg, const std::string& json_text);

// Artifact locations inside work_dir.
struct Artifacts {
    std::string corpus, questions_train, questions_test, synth_manifest;
    std::string index;
    std::string candidates_train, candidates_test;
    std::string ranker_ckpt, negatives, model_ckpt, train_log;
    std::string scores, results, report_json, report_text;
};
Artifacts artifacts_for(const std::string& work_dir);

// JSONL schemas shared between stages, the CLI and tests.
void save_candidates(const std::vector<CandidateSet>& sets, const std::string& path);
std::vector<CandidateSet> load_candidates(const std::string& path);

struct ScoreRecord {
    std::string qid;
    std::vector<ScoredParagraph> scores;
};
void save_scores(const std::vector<ScoreRecord>& records, const std::string& path);
std::vector<ScoreRecord> load_scores(const std::string& path);

void save_results(const std::vector<RetrievalResult>& results, const std::string& path);
std::vector<RetrievalResult> load_results(const std::string& path);

void save_negatives(const std::vector<MinedNegatives>& negs, const std::string& path);
std::vector<MinedNegatives> load_negatives(const std::string& path);

std::uint64_t hash_file(const std::string& path);

extern const std::vector<std::string> kStageOrder;

// Executes one stage; writes a manifest with input hashes next to its outputs.
void run_stage(const std::string& stage, const PipelineConfig& config);

MetricsReport run_all(const PipelineConfig& config);

struct AblationReport {
    MetricsReport full;
    MetricsReport ablated;
    std::string flag;
};
AblationReport run_ablation(const PipelineConfig& base, const std::string& flag);

}  // namespace gmf
