#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gmf/memory_flow.hpp"
#include "gmf/term_retrieval.hpp"

namespace gmf {

struct TrainingEpisode {
    std::string qid;
    std::vector<std::string> paragraphs;  // 2 gold + 8 negatives, seeded order
    std::vector<int> labels;
    bool padded = false;  // negatives padded from the corpus at large
};

struct TrainConfig {
    int epochs = 10;
    double learning_rate = 0.05;
    double momentum = 0.9;
    int batch_size = 4;
    std::uint64_t seed = 1;
    double gate = 0.2;
    int gate_activation_epoch = 1;  // gate active for epochs > this
    int negatives_per_episode = 8;
    bool through_memory = false;    // backprop across memory writes
    bool no_memory = false;         // never write (pointwise ranker mode)
};

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;        // mean per-episode BCE
    double write_rate = 0.0;  // fraction of paragraphs written this epoch
    double dev_pem = -1.0;    // -1 when no dev evaluation ran
    double dev_precision = -1.0;
};

// Builds 2-gold + N-negative episodes from each question's candidate set.
// Negatives come from the candidate set minus golds; short sets are padded
// with seeded random corpus paragraphs.
std::vector<TrainingEpisode> make_episodes(const std::vector<Question>& questions,
                                           const std::vector<CandidateSet>& candidates,
                                           const CorpusStore& store, int negatives,
                                           std::uint64_t seed);

// Replaces each episode's negatives with the given mined lists (parallel to
// episodes by qid).
void apply_mined_negatives(std::vector<TrainingEpisode>& episodes,
                           const std::vector<std::pair<std::string, std::vector<std::string>>>&
                               mined);

using DevEvalFn = std::function<std::pair<double, double>(const ModelParams&)>;

// When a dev evaluator is supplied, params holds the epoch with the best dev
// P EM (first such epoch on ties); without one, the final epoch.
struct TrainResult {
    ModelParams params;
    std::vector<EpochLog> log;
    int best_epoch = -1;
};

TrainResult train(ModelParams params, const TokenVocab& vocab, const CorpusStore& store,
                  const std::vector<Question>& questions,
                  std::vector<TrainingEpisode> episodes, const TrainConfig& config,
                  const DevEvalFn& dev_eval = nullptr);

// The pointwise baseline ranker is this model's own no-memory ablation.
TrainResult train_pointwise_ranker(ModelParams params, const TokenVocab& vocab,
                                   const CorpusStore& store,
                                   const std::vector<Question>& questions,
                                   std::vector<TrainingEpisode> episodes, TrainConfig config);

double ranker_score(const ModelParams& params, const TokenVocab& vocab,
                    const std::string& question, const Paragraph& paragraph);

struct MinedNegatives {
    std::string qid;
    std::vector<std::string> negatives;
    bool padded = false;
};

MinedNegatives mine_hard_negatives(const ModelParams& ranker, const TokenVocab& vocab,
                                   const Question& question, const CandidateSet& candidates,
                                   const CorpusStore& store, int count, std::uint64_t seed);

}  // namespace gmf
