#include "gmf/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>

namespace gmf {

namespace {

// Fisher-Yates with an explicit engine so the permutation is identical across
// standard libraries.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = rng() % i;
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace

std::vector<TrainingEpisode> make_episodes(const std::vector<Question>& questions,
                                           const std::vector<CandidateSet>& candidates,
                                           const CorpusStore& store, int negatives,
                                           std::uint64_t seed) {
    std::map<std::string, const CandidateSet*> by_qid;
    for (const CandidateSet& cs : candidates) by_qid[cs.qid] = &cs;
    std::mt19937_64 rng(seed);
    std::vector<TrainingEpisode> episodes;
    for (const Question& q : questions) {
        auto it = by_qid.find(q.id);
        if (it == by_qid.end()) continue;
        const CandidateSet& cs = *it->second;
        std::vector<std::string> pool;
        for (const CandidateEntry& e : cs.entries) {
            if (std::find(q.gold_evidence.begin(), q.gold_evidence.end(), e.pid) ==
                q.gold_evidence.end()) {
                pool.push_back(e.pid);
            }
        }
        seeded_shuffle(pool, rng);
        TrainingEpisode ep;
        ep.qid = q.id;
        for (const std::string& gid : q.gold_evidence) ep.paragraphs.push_back(gid);
        for (int i = 0; i < negatives && i < static_cast<int>(pool.size()); ++i) {
            ep.paragraphs.push_back(pool[i]);
        }
        while (static_cast<int>(ep.paragraphs.size()) <
               static_cast<int>(q.gold_evidence.size()) + negatives) {
            const auto& paras = store.paragraphs();
            const Paragraph& p = paras[rng() % paras.size()];
            if (std::find(ep.paragraphs.begin(), ep.paragraphs.end(), p.id) ==
                ep.paragraphs.end()) {
                ep.paragraphs.push_back(p.id);
                ep.padded = true;
            }
        }
        ep.labels.assign(ep.paragraphs.size(), 0);
        for (std::size_t i = 0; i < q.gold_evidence.size(); ++i) ep.labels[i] = 1;
        episodes.push_back(std::move(ep));
    }
    if (episodes.empty()) throw std::runtime_error("make_episodes: no usable questions");
    return episodes;
}

void apply_mined_negatives(
    std::vector<TrainingEpisode>& episodes,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& mined) {
    std::map<std::string, const std::vector<std::string>*> by_qid;
    for (const auto& [qid, negs] : mined) by_qid[qid] = &negs;
    for (TrainingEpisode& ep : episodes) {
        auto it = by_qid.find(ep.qid);
        if (it == by_qid.end()) continue;
        std::size_t n_gold = 0;
        for (int l : ep.labels) n_gold += l;
        ep.paragraphs.resize(n_gold);
        for (const std::string& pid : *it->second) ep.paragraphs.push_back(pid);
        ep.labels.assign(ep.paragraphs.size(), 0);
        for (std::size_t i = 0; i < n_gold; ++i) ep.labels[i] = 1;
    }
}

namespace {

struct Momentum {
    ModelParams velocity;

    explicit Momentum(const ModelParams& shape) : velocity(ModelParams::zeros_like(shape)) {}

    void step(ModelParams& params, const ModelParams& grad, double lr, double mu) {
        auto vm = velocity.matrices();
        auto pm = params.matrices();
        auto gm = grad.matrices();
        for (std::size_t i = 0; i < pm.size(); ++i) {
            for (std::size_t j = 0; j < pm[i]->a.size(); ++j) {
                vm[i]->a[j] = mu * vm[i]->a[j] - lr * gm[i]->a[j];
                pm[i]->a[j] += vm[i]->a[j];
            }
        }
        auto vv = velocity.vectors();
        auto pv = params.vectors();
        auto gv = grad.vectors();
        for (std::size_t i = 0; i < pv.size(); ++i) {
            for (std::size_t j = 0; j < pv[i]->size(); ++j) {
                (*vv[i])[j] = mu * (*vv[i])[j] - lr * (*gv[i])[j];
                (*pv[i])[j] += (*vv[i])[j];
            }
        }
    }
};

}  // namespace

TrainResult train(ModelParams params, const TokenVocab& vocab, const CorpusStore& store,
                  const std::vector<Question>& questions,
                  std::vector<TrainingEpisode> episodes, const TrainConfig& config,
                  const DevEvalFn& dev_eval) {
    if (episodes.empty()) throw std::runtime_error("train: no episodes");
    std::map<std::string, const Question*> q_by_id;
    for (const Question& q : questions) q_by_id[q.id] = &q;

    Momentum opt(params);
    std::mt19937_64 rng(config.seed);
    TrainResult result{std::move(params), {}};
    std::optional<ModelParams> best;
    double best_pem = -1.0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        bool gate_enabled = !config.no_memory && epoch > config.gate_activation_epoch;
        double gate = config.no_memory ? 2.0 : config.gate;
        bool never_write = config.no_memory;

        seeded_shuffle(episodes, rng);
        double total_loss = 0.0;
        std::size_t written = 0, total_steps = 0;

        for (std::size_t start = 0; start < episodes.size(); start += config.batch_size) {
            std::size_t end = std::min(start + config.batch_size, episodes.size());
            ModelParams grad = ModelParams::zeros_like(result.params);
            for (std::size_t e = start; e < end; ++e) {
                TrainingEpisode& ep = episodes[e];
                // fresh per-epoch presentation order
                std::vector<std::size_t> perm(ep.paragraphs.size());
                for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
                seeded_shuffle(perm, rng);
                std::vector<const Paragraph*> paras;
                std::vector<int> labels;
                for (std::size_t i : perm) {
                    paras.push_back(&store.at(ep.paragraphs[i]));
                    labels.push_back(ep.labels[i]);
                }
                const Question& q = *q_by_id.at(ep.qid);
                EpisodeTrace trace =
                    run_episode(result.params, vocab, q.text, paras, gate,
                                gate_enabled || never_write);
                double loss = episode_backward(result.params, trace, labels, grad,
                                               config.through_memory);
                if (!std::isfinite(loss)) {
                    throw std::runtime_error("train: loss diverged (non-finite)");
                }
                total_loss += loss;
                for (const StepTape& s : trace.steps) {
                    ++total_steps;
                    if (s.written) ++written;
                }
            }
            // mean over the batch keeps the step size independent of batch size
            opt.step(result.params, grad,
                     config.learning_rate / static_cast<double>(end - start),
                     config.momentum);
        }

        EpochLog log;
        log.epoch = epoch;
        log.loss = total_loss / static_cast<double>(episodes.size());
        log.write_rate =
            total_steps ? static_cast<double>(written) / static_cast<double>(total_steps) : 0.0;
        if (dev_eval) {
            auto [pem, precision] = dev_eval(result.params);
            log.dev_pem = pem;
            log.dev_precision = precision;
            if (!best || pem > best_pem) {
                best = result.params;
                best_pem = pem;
                result.best_epoch = epoch;
            }
        }
        result.log.push_back(log);
    }
    if (best) result.params = std::move(*best);
    return result;
}

TrainResult train_pointwise_ranker(ModelParams params, const TokenVocab& vocab,
                                   const CorpusStore& store,
                                   const std::vector<Question>& questions,
                                   std::vector<TrainingEpisode> episodes, TrainConfig config) {
    config.no_memory = true;
    return train(std::move(params), vocab, store, questions, std::move(episodes), config);
}

double ranker_score(const ModelParams& params, const TokenVocab& vocab,
                    const std::string& question, const Paragraph& paragraph) {
    Encoding enc = encode(params, vocab, question, paragraph, params.config.max_len);
    Vec zero(params.config.dim, 0.0);
    return score_paragraph(params, enc.x, zero);
}

MinedNegatives mine_hard_negatives(const ModelParams& ranker, const TokenVocab& vocab,
                                   const Question& question, const CandidateSet& candidates,
                                   const CorpusStore& store, int count, std::uint64_t seed) {
    std::vector<std::pair<double, std::string>> scored;
    for (const CandidateEntry& e : candidates.entries) {
        if (std::find(question.gold_evidence.begin(), question.gold_evidence.end(), e.pid) !=
            question.gold_evidence.end()) {
            continue;
        }
        scored.emplace_back(ranker_score(ranker, vocab, question.text, store.at(e.pid)), e.pid);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    MinedNegatives out;
    out.qid = question.id;
    for (const auto& [score, pid] : scored) {
        if (static_cast<int>(out.negatives.size()) >= count) break;
        out.negatives.push_back(pid);
    }
    std::mt19937_64 rng(seed);
    while (static_cast<int>(out.negatives.size()) < count) {
        const auto& paras = store.paragraphs();
        const Paragraph& p = paras[rng() % paras.size()];
        bool is_gold = std::find(question.gold_evidence.begin(), question.gold_evidence.end(),
                                 p.id) != question.gold_evidence.end();
        if (!is_gold && std::find(out.negatives.begin(), out.negatives.end(), p.id) ==
                            out.negatives.end()) {
            out.negatives.push_back(p.id);
            out.padded = true;
        }
    }
    return out;
}

}  // namespace gmf
