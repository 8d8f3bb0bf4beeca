#include "gmf/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>

#include <json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace gmf {

const std::vector<std::string> kStageOrder = {
    "synthgen", "ingest",       "index", "candidates", "train-ranker",
    "mine",     "train",        "score", "select",     "evaluate"};

void PipelineConfig::validate() const {
    if (n_kwm < 1 || n_tfidf < 1) throw ConfigError("n_kwm and n_tfidf must be positive");
    if (dim < 1 || heads < 1 || dim % heads != 0) {
        throw ConfigError("heads must divide dim and both must be positive");
    }
    if (max_len < 3) throw ConfigError("max_len must be >= 3");
    if (n_retri < 1) throw ConfigError("n_retri must be positive");
    if (chunk_size < 1) throw ConfigError("chunk_size must be positive");
    if (h_d < 0.0 || h_d >= 1.0) throw ConfigError("h_d must be in [0,1)");
    if (gate <= 0.0) throw ConfigError("gate must be positive");
    if (train.epochs < 0 || ranker_train.epochs < 0) {
        throw ConfigError("epochs must be nonnegative");
    }
    if (dev_fraction < 0.0 || dev_fraction > 0.5) {
        throw ConfigError("dev_fraction must be in [0,0.5]");
    }
    if (threads < 1) throw ConfigError("threads must be positive");
}

PipelineConfig desk_preset() {
    PipelineConfig cfg;
    cfg.ranker_train.epochs = 6;
    cfg.ranker_train.learning_rate = 0.05;
    cfg.ranker_train.batch_size = 4;
    cfg.ranker_train.no_memory = true;
    cfg.train.epochs = 45;
    cfg.train.learning_rate = 0.004;
    cfg.train.batch_size = 4;
    return cfg;
}

PipelineConfig paper_preset() {
    PipelineConfig cfg = desk_preset();
    cfg.dim = 1024;
    cfg.heads = 16;
    cfg.n_retri = 8;
    cfg.h_d = 0.025;
    cfg.train.epochs = 2;
    cfg.train.learning_rate = 1e-5;
    cfg.train.batch_size = 6;
    return cfg;
}

void apply_config_json(PipelineConfig& cfg, const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("config is not a JSON object");
    if (j.value("preset", "") == "paper") cfg = paper_preset();
    cfg.work_dir = j.value("work_dir", cfg.work_dir);
    if (j.contains("synth")) {
        const json& s = j["synth"];
        cfg.synth.seed = s.value("seed", cfg.synth.seed);
        cfg.synth.n_entities = s.value("n_entities", cfg.synth.n_entities);
        cfg.synth.n_bridge_questions =
            s.value("n_bridge_questions", cfg.synth.n_bridge_questions);
        cfg.synth.n_comparison_questions =
            s.value("n_comparison_questions", cfg.synth.n_comparison_questions);
        cfg.synth.n_distractors_per_question =
            s.value("n_distractors_per_question", cfg.synth.n_distractors_per_question);
        cfg.synth.n_decoys_per_comparison =
            s.value("n_decoys_per_comparison", cfg.synth.n_decoys_per_comparison);
        cfg.synth.vocab_size = s.value("vocab_size", cfg.synth.vocab_size);
        cfg.synth.link_direction_mix =
            s.value("link_direction_mix", cfg.synth.link_direction_mix);
        cfg.synth.train_fraction = s.value("train_fraction", cfg.synth.train_fraction);
    }
    cfg.n_kwm = j.value("n_kwm", cfg.n_kwm);
    cfg.n_tfidf = j.value("n_tfidf", cfg.n_tfidf);
    cfg.dim = j.value("dim", cfg.dim);
    cfg.heads = j.value("heads", cfg.heads);
    cfg.max_len = j.value("max_len", cfg.max_len);
    cfg.model_seed = j.value("model_seed", cfg.model_seed);
    if (j.contains("train")) {
        const json& t = j["train"];
        cfg.train.epochs = t.value("epochs", cfg.train.epochs);
        cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
        cfg.train.momentum = t.value("momentum", cfg.train.momentum);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.seed = t.value("seed", cfg.train.seed);
        cfg.train.gate_activation_epoch =
            t.value("gate_activation_epoch", cfg.train.gate_activation_epoch);
        cfg.train.through_memory = t.value("through_memory", cfg.train.through_memory);
    }
    if (j.contains("ranker_train")) {
        const json& t = j["ranker_train"];
        cfg.ranker_train.epochs = t.value("epochs", cfg.ranker_train.epochs);
        cfg.ranker_train.learning_rate =
            t.value("learning_rate", cfg.ranker_train.learning_rate);
        cfg.ranker_train.batch_size = t.value("batch_size", cfg.ranker_train.batch_size);
        cfg.ranker_train.seed = t.value("seed", cfg.ranker_train.seed);
    }
    cfg.dev_fraction = j.value("dev_fraction", cfg.dev_fraction);
    cfg.n_retri = j.value("n_retri", cfg.n_retri);
    cfg.h_d = j.value("h_d", cfg.h_d);
    cfg.chunk_size = j.value("chunk_size", cfg.chunk_size);
    cfg.gate = j.value("gate", cfg.gate);
    cfg.no_bidirectional_links = j.value("no_bidirectional_links", cfg.no_bidirectional_links);
    cfg.no_gate = j.value("no_gate", cfg.no_gate);
    cfg.no_memory = j.value("no_memory", cfg.no_memory);
    cfg.random_negatives = j.value("random_negatives", cfg.random_negatives);
    cfg.threads = j.value("threads", cfg.threads);
}

PipelineConfig config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    PipelineConfig cfg = desk_preset();
    apply_config_json(cfg, text);
    return cfg;
}

Artifacts artifacts_for(const std::string& work_dir) {
    fs::path d(work_dir);
    Artifacts a;
    a.corpus = (d / "corpus.jsonl").string();
    a.questions_train = (d / "questions_train.jsonl").string();
    a.questions_test = (d / "questions_test.jsonl").string();
    a.synth_manifest = (d / "manifest.json").string();
    a.index = (d / "index.jsonl").string();
    a.candidates_train = (d / "candidates_train.jsonl").string();
    a.candidates_test = (d / "candidates_test.jsonl").string();
    a.ranker_ckpt = (d / "ranker.ckpt").string();
    a.negatives = (d / "negatives.jsonl").string();
    a.model_ckpt = (d / "model.ckpt").string();
    a.train_log = (d / "train_log.jsonl").string();
    a.scores = (d / "scores_test.jsonl").string();
    a.results = (d / "results_test.jsonl").string();
    a.report_json = (d / "report.json").string();
    a.report_text = (d / "report.txt").string();
    return a;
}

void save_candidates(const std::vector<CandidateSet>& sets, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const CandidateSet& cs : sets) {
        json entries = json::array();
        for (const CandidateEntry& e : cs.entries) {
            entries.push_back({{"pid", e.pid}, {"source", to_string(e.source)},
                               {"rank", e.rank}});
        }
        out << json{{"qid", cs.qid}, {"candidates", entries}}.dump() << "\n";
    }
}

std::vector<CandidateSet> load_candidates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<CandidateSet> sets;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        CandidateSet cs;
        cs.qid = j.at("qid").get<std::string>();
        for (const json& e : j.at("candidates")) {
            CandidateSource src = CandidateSource::kwm;
            std::string s = e.at("source").get<std::string>();
            if (s == "tfidf") src = CandidateSource::tfidf;
            else if (s == "hyperlink") src = CandidateSource::hyperlink;
            cs.entries.push_back({e.at("pid").get<std::string>(), src,
                                  e.at("rank").get<int>()});
        }
        sets.push_back(std::move(cs));
    }
    return sets;
}

void save_scores(const std::vector<ScoreRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const ScoreRecord& r : records) {
        json scores = json::array();
        for (const ScoredParagraph& s : r.scores) {
            scores.push_back({{"pid", s.pid}, {"s", s.score}, {"written", s.written}});
        }
        out << json{{"qid", r.qid}, {"scores", scores}}.dump() << "\n";
    }
}

std::vector<ScoreRecord> load_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<ScoreRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        ScoreRecord r;
        r.qid = j.at("qid").get<std::string>();
        for (const json& s : j.at("scores")) {
            r.scores.push_back({s.at("pid").get<std::string>(), s.at("s").get<double>(),
                                s.at("written").get<bool>(), {}});
        }
        records.push_back(std::move(r));
    }
    return records;
}

void save_results(const std::vector<RetrievalResult>& results, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const RetrievalResult& r : results) {
        json retrieved = json::array();
        for (const auto& [pid, s] : r.retrieved) retrieved.push_back({{"pid", pid}, {"s", s}});
        out << json{{"qid", r.qid}, {"retrieved", retrieved},
                    {"candidate_size", r.candidate_size}}.dump()
            << "\n";
    }
}

std::vector<RetrievalResult> load_results(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<RetrievalResult> results;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        RetrievalResult r;
        r.qid = j.at("qid").get<std::string>();
        for (const json& e : j.at("retrieved")) {
            r.retrieved.emplace_back(e.at("pid").get<std::string>(), e.at("s").get<double>());
        }
        r.candidate_size = j.at("candidate_size").get<std::size_t>();
        results.push_back(std::move(r));
    }
    return results;
}

void save_negatives(const std::vector<MinedNegatives>& negs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const MinedNegatives& n : negs) {
        out << json{{"qid", n.qid}, {"negatives", n.negatives}, {"padded", n.padded}}.dump()
            << "\n";
    }
}

std::vector<MinedNegatives> load_negatives(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<MinedNegatives> negs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        negs.push_back({j.at("qid").get<std::string>(),
                        j.at("negatives").get<std::vector<std::string>>(),
                        j.at("padded").get<bool>()});
    }
    return negs;
}

std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot hash missing file: " + path);
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    return h;
}

namespace {

void require_artifact(const std::string& path, const std::string& producer_stage) {
    if (!fs::exists(path)) {
        throw MissingDependencyError("missing artifact " + path + ": run " + producer_stage +
                                     " first");
    }
}

void write_stage_manifest(const std::string& work_dir, const std::string& stage,
                          const std::vector<std::string>& inputs,
                          const std::vector<std::string>& outputs) {
    json in_hashes = json::object();
    for (const std::string& p : inputs) in_hashes[fs::path(p).filename().string()] = hash_file(p);
    json out_hashes = json::object();
    for (const std::string& p : outputs) out_hashes[fs::path(p).filename().string()] = hash_file(p);
    json j{{"stage", stage}, {"inputs", in_hashes}, {"outputs", out_hashes}};
    std::ofstream out((fs::path(work_dir) / ("stage_" + stage + ".manifest.json")).string());
    out << j.dump(2) << "\n";
}

struct LoadedData {
    CorpusStore store;
    std::vector<Question> train_questions;
    std::vector<Question> test_questions;
};

LoadedData load_data(const Artifacts& a, bool need_questions = true) {
    LoadedData d;
    d.store = ingest_corpus(a.corpus);
    if (need_questions) {
        d.train_questions = ingest_questions(a.questions_train, d.store, true).questions;
        d.test_questions = ingest_questions(a.questions_test, d.store, true).questions;
    }
    return d;
}

TokenVocab build_vocab(const LoadedData& d) {
    return TokenVocab::build(d.store, d.train_questions);
}

TrainConfig effective_train_config(const PipelineConfig& cfg, bool ranker) {
    TrainConfig t = ranker ? cfg.ranker_train : cfg.train;
    t.gate = cfg.gate;
    if (ranker || cfg.no_memory) {
        t.no_memory = true;
    } else if (cfg.no_gate) {
        t.gate_activation_epoch = std::numeric_limits<int>::max();
    }
    return t;
}

std::vector<const Paragraph*> candidate_paragraphs(const CandidateSet& cs,
                                                   const CorpusStore& store) {
    std::vector<const Paragraph*> out;
    for (const CandidateEntry& e : cs.entries) out.push_back(&store.at(e.pid));
    return out;
}

// Inference-time gating for the configured ablation.
struct GateMode {
    double gate;
    bool enabled;
};

GateMode inference_gate(const PipelineConfig& cfg) {
    if (cfg.no_memory) return {2.0, true};  // never write
    if (cfg.no_gate) return {cfg.gate, false};
    return {cfg.gate, true};
}

std::vector<ScoreRecord> score_question_set(const PipelineConfig& cfg,
                                            const ModelParams& params,
                                            const TokenVocab& vocab, const CorpusStore& store,
                                            const std::vector<Question>& questions,
                                            const std::vector<CandidateSet>& candidates) {
    GateMode gm = inference_gate(cfg);
    std::map<std::string, const Question*> q_by_id;
    for (const Question& q : questions) q_by_id[q.id] = &q;
    std::vector<ScoreRecord> records;
    for (const CandidateSet& cs : candidates) {
        auto it = q_by_id.find(cs.qid);
        if (it == q_by_id.end()) continue;
        ScoreRecord rec;
        rec.qid = cs.qid;
        if (!cs.entries.empty()) {
            rec.scores = score_candidates_chunked(params, vocab, *it->second,
                                                  candidate_paragraphs(cs, store),
                                                  cfg.chunk_size, gm.gate, gm.enabled);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

// Stratified fit/dev split of the training questions. The dev slice steers
// checkpoint selection, so it must not come from the test split.
void split_dev(const std::vector<Question>& all, double dev_fraction, std::uint64_t seed,
               std::vector<Question>& fit, std::vector<Question>& dev) {
    std::vector<std::size_t> bridge_ix, comparison_ix;
    for (std::size_t i = 0; i < all.size(); ++i) {
        (all[i].qtype == QuestionType::bridge ? bridge_ix : comparison_ix).push_back(i);
    }
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    auto take = [&](std::vector<std::size_t>& ix) {
        for (std::size_t i = ix.size(); i > 1; --i) std::swap(ix[i - 1], ix[rng() % i]);
        std::size_t n_dev = static_cast<std::size_t>(
            dev_fraction * static_cast<double>(ix.size()) + 0.5);
        for (std::size_t i = 0; i < ix.size(); ++i) {
            (i < n_dev ? dev : fit).push_back(all[ix[i]]);
        }
    };
    take(bridge_ix);
    take(comparison_ix);
    if (fit.empty()) std::swap(fit, dev);
}

void stage_synthgen(const PipelineConfig& cfg, const Artifacts& a) {
    generate(cfg.synth, cfg.work_dir);
    write_stage_manifest(cfg.work_dir, "synthgen", {},
                         {a.corpus, a.questions_train, a.questions_test, a.synth_manifest});
}

void stage_ingest(const PipelineConfig& cfg, const Artifacts& a) {
    require_artifact(a.corpus, "synthgen");
    require_artifact(a.questions_train, "synthgen");
    require_artifact(a.questions_test, "synthgen");
    LoadedData d = load_data(a);
    json j{{"paragraphs", d.store.stats().paragraphs},
           {"self_links_dropped", d.store.stats().self_links_dropped},
           {"dangling_links", d.store.stats().dangling_links},
           {"train_questions", d.train_questions.size()},
           {"test_questions", d.test_questions.size()}};
    std::ofstream out((fs::path(cfg.work_dir) / "ingest_report.json").string());
    out << j.dump(2) << "\n";
    write_stage_manifest(cfg.work_dir, "ingest",
                         {a.corpus, a.questions_train, a.questions_test}, {});
}

void stage_index(const PipelineConfig& cfg, const Artifacts& a) {
    require_artifact(a.corpus, "synthgen");
    CorpusStore store = ingest_corpus(a.corpus);
    save_index(build_index(store), a.index);
    write_stage_manifest(cfg.work_dir, "index", {a.corpus}, {a.index});
}

void stage_candidates(const PipelineConfig& cfg, const Artifacts& a) {
    require_artifact(a.corpus, "synthgen");
    require_artifact(a.index, "index");
    LoadedData d = load_data(a);
    InvertedIndex index = load_index(a.index);
    auto build = [&](const std::vector<Question>& qs, const std::string& path) {
        std::vector<CandidateSet> sets;
        for (const Question& q : qs) {
            sets.push_back(build_candidate_set(q, d.store, index, d.store.graph(), cfg.n_kwm,
                                               cfg.n_tfidf, cfg.no_bidirectional_links));
        }
        save_candidates(sets, path);
    };
    build(d.train_questions, a.candidates_train);
    build(d.test_questions, a.candidates_test);
    write_stage_manifest(cfg.work_dir, "candidates",
                         {a.corpus, a.questions_train, a.questions_test, a.index},
                         {a.candidates_train, a.candidates_test});
}

void stage_train_ranker(const PipelineConfig& cfg, const Artifacts& a) {
    require_artifact(a.candidates_train, "candidates");
    LoadedData d = load_data(a);
    TokenVocab vocab = build_vocab(d);
    std::vector<CandidateSet> candidates = load_candidates(a.candidates_train);
    TrainConfig tc = effective_train_config(cfg, true);
    std::vector<TrainingEpisode> episodes = make_episodes(
        d.train_questions, candidates, d.store, tc.negatives_per_episode, tc.seed);
    ModelConfig mc{cfg.dim, cfg.heads, cfg.max_len, cfg.model_seed};
    ModelParams params = ModelParams::init(mc, vocab.size());
    TrainResult result = train_pointwise_ranker(std::move(params), vocab, d.store,
                                                d.train_questions, std::move(episodes), tc);
    save_checkpoint({std::move(result.params), vocab}, a.ranker_ckpt);
    write_stage_manifest(cfg.work_dir, "train-ranker",
                         {a.corpus, a.questions_train, a.candidates_train}, {a.ranker_ckpt});
}

void stage_mine(const PipelineConfig& cfg, const Artifacts& a) {
    require_artifact(a.ranker_ckpt, "train-ranker");
    require_artifact(a.candidates_train, "candidates");
    LoadedData d = load_data(a);
    Checkpoint ranker = load_checkpoint(a.ranker_ckpt);
    std::vector<CandidateSet> candidates = load_candidates(a.candidates_train);
    std::map<std::string, const CandidateSet*> by_qid;
    for (const CandidateSet& cs : candidates) by_qid[cs.qid] = &cs;
    std::vector<MinedNegatives> mined;
    for (const Question& q : d.train_questions) {
        auto it = by_qid.find(q.id);
        if (it == by_qid.end()) continue;
        mined.push_back(mine_hard_negatives(ranker.params, ranker.vocab, q, *it->second,
                                            d.store, cfg.train.negatives_per_episode,
                                            cfg.train.seed ^ hash_file(a.ranker_ckpt)));
    }
    save_negatives(mined, a.negatives);
    write_stage_manifest(cfg.work_dir, "mine",
                         {a.ranker_ckpt, a.candidates_train, a.questions_train},
                         {a.negatives});
}

void stage_train(const PipelineConfig& cfg, const Artifacts& a) {
    require_artifact(a.candidates_train, "candidates");
    if (!cfg.random_negatives) require_artifact(a.negatives, "mine");
    LoadedData d = load_data(a);
    TokenVocab vocab = build_vocab(d);
    std::vector<CandidateSet> train_candidates = load_candidates(a.candidates_train);
    TrainConfig tc = effective_train_config(cfg, false);

    std::vector<Question> fit_questions, dev_questions;
    split_dev(d.train_questions, cfg.dev_fraction, tc.seed, fit_questions, dev_questions);

    std::vector<TrainingEpisode> episodes = make_episodes(
        fit_questions, train_candidates, d.store, tc.negatives_per_episode, tc.seed);
    if (!cfg.random_negatives) {
        std::vector<std::pair<std::string, std::vector<std::string>>> mined;
        for (const MinedNegatives& n : load_negatives(a.negatives)) {
            mined.emplace_back(n.qid, n.negatives);
        }
        apply_mined_negatives(episodes, mined);
    }
    ModelConfig mc{cfg.dim, cfg.heads, cfg.max_len, cfg.model_seed};
    ModelParams params = ModelParams::init(mc, vocab.size());

    DevEvalFn dev = nullptr;
    if (!dev_questions.empty()) {
        dev = [&](const ModelParams& p) -> std::pair<double, double> {
            std::vector<ScoreRecord> records = score_question_set(
                cfg, p, vocab, d.store, dev_questions, train_candidates);
            std::vector<RetrievalResult> results;
            for (const ScoreRecord& r : records) {
                results.push_back(select_paragraphs(r.qid, r.scores, cfg.n_retri, cfg.h_d));
            }
            MetricsReport rep = evaluate(results, dev_questions, d.store, &train_candidates);
            return {rep.p_em, rep.precision};
        };
    }

    TrainResult result =
        train(std::move(params), vocab, d.store, fit_questions, std::move(episodes), tc, dev);
    save_checkpoint({result.params, vocab}, a.model_ckpt);
    {
        std::ofstream log(a.train_log);
        for (const EpochLog& e : result.log) {
            log << json{{"epoch", e.epoch},
                        {"loss", e.loss},
                        {"write_rate", e.write_rate},
                        {"dev_pem", e.dev_pem},
                        {"dev_precision", e.dev_precision}}.dump()
                << "\n";
        }
        log << json{{"best_epoch", result.best_epoch},
                    {"dev_questions", dev_questions.size()}}.dump()
            << "\n";
    }
    write_stage_manifest(cfg.work_dir, "train",
                         {a.corpus, a.questions_train, a.candidates_train},
                         {a.model_ckpt, a.train_log});
}

void stage_score(const PipelineConfig& cfg, const Artifacts& a) {
    require_artifact(a.model_ckpt, "train");
    require_artifact(a.candidates_test, "candidates");
    LoadedData d = load_data(a);
    Checkpoint ckpt = load_checkpoint(a.model_ckpt);
    std::vector<CandidateSet> candidates = load_candidates(a.candidates_test);
    save_scores(score_question_set(cfg, ckpt.params, ckpt.vocab, d.store, d.test_questions,
                                   candidates),
                a.scores);
    write_stage_manifest(cfg.work_dir, "score", {a.model_ckpt, a.candidates_test},
                         {a.scores});
}

void stage_select(const PipelineConfig& cfg, const Artifacts& a) {
    require_artifact(a.scores, "score");
    std::vector<RetrievalResult> results;
    for (const ScoreRecord& r : load_scores(a.scores)) {
        results.push_back(select_paragraphs(r.qid, r.scores, cfg.n_retri, cfg.h_d));
    }
    save_results(results, a.results);
    write_stage_manifest(cfg.work_dir, "select", {a.scores}, {a.results});
}

void stage_evaluate(const PipelineConfig& cfg, const Artifacts& a) {
    require_artifact(a.results, "select");
    require_artifact(a.candidates_test, "candidates");
    LoadedData d = load_data(a);
    std::vector<CandidateSet> candidates = load_candidates(a.candidates_test);
    MetricsReport rep = evaluate(load_results(a.results), d.test_questions, d.store,
                                 &candidates);
    {
        std::ofstream out(a.report_json);
        out << render_report_json(rep) << "\n";
    }
    {
        std::ofstream out(a.report_text);
        out << render_report_text(rep);
    }
    write_stage_manifest(cfg.work_dir, "evaluate",
                         {a.results, a.questions_test, a.candidates_test},
                         {a.report_json, a.report_text});
}

}  // namespace

void run_stage(const std::string& stage, const PipelineConfig& config) {
    config.validate();
    fs::create_directories(config.work_dir);
    Artifacts a = artifacts_for(config.work_dir);
    if (stage == "synthgen") stage_synthgen(config, a);
    else if (stage == "ingest") stage_ingest(config, a);
    else if (stage == "index") stage_index(config, a);
    else if (stage == "candidates") stage_candidates(config, a);
    else if (stage == "train-ranker") stage_train_ranker(config, a);
    else if (stage == "mine") stage_mine(config, a);
    else if (stage == "train") stage_train(config, a);
    else if (stage == "score") stage_score(config, a);
    else if (stage == "select") stage_select(config, a);
    else if (stage == "evaluate") stage_evaluate(config, a);
    else throw ConfigError("unknown stage: " + stage);
}

MetricsReport run_all(const PipelineConfig& config) {
    for (const std::string& stage : kStageOrder) {
        if (stage == "mine" && config.random_negatives) continue;
        if (stage == "train-ranker" && config.random_negatives) continue;
        run_stage(stage, config);
    }
    Artifacts a = artifacts_for(config.work_dir);
    std::ifstream in(a.report_json);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_report_json(text);
}

AblationReport run_ablation(const PipelineConfig& base, const std::string& flag) {
    PipelineConfig full = base;
    full.work_dir = (fs::path(base.work_dir) / "full").string();
    PipelineConfig ablated = base;
    ablated.work_dir = (fs::path(base.work_dir) / flag).string();
    if (flag == "no_bidirectional_links") ablated.no_bidirectional_links = true;
    else if (flag == "no_gate") ablated.no_gate = true;
    else if (flag == "no_memory") ablated.no_memory = true;
    else if (flag == "random_negatives") ablated.random_negatives = true;
    else throw ConfigError("unknown ablation flag: " + flag);
    AblationReport report;
    report.flag = flag;
    report.full = run_all(full);
    report.ablated = run_all(ablated);
    return report;
}

}  // namespace gmf
