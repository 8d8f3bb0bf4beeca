#include "gmf/synthgen.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "gmf/term_retrieval.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace gmf {

namespace {

// Shared type-marker tokens. These recur across all questions, so the model
// can learn them; per-question tokens are unique and carry no trainable
// signal on the test split.
const std::vector<std::string> kBridgeBodyPool = {
    "bcom0", "bcom1", "bcom2", "bcom3", "bcom4",
    "bcom5", "bcom6", "bcom7", "bcom8", "bcom9"};

// Bridge targets and decoys are assembled entirely from these shared pools,
// unique only in combination. A paragraph built from per-question one-off
// tokens would let training fit each label through that token's embedding
// instead of the marker signature, and the fit would not transfer to the
// test split.
constexpr int kTargetTitlePool = 30;   // "u<i>", paired into target titles
constexpr int kAnswerPool = 24;        // "ans<i>"

template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = rng() % i;
        std::swap(v[i - 1], v[j]);
    }
}

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (const std::string& t : tokens) {
        if (!out.empty()) out += " ";
        out += t;
    }
    return out;
}

struct Builder {
    const SynthSpec& spec;
    std::mt19937_64 rng;
    std::vector<Paragraph> paragraphs;
    std::vector<Question> questions;
    SynthManifest manifest;
    std::vector<std::string> junk_pool;

    explicit Builder(const SynthSpec& s) : spec(s), rng(s.seed) {
        for (int i = 0; i < spec.vocab_size; ++i) {
            junk_pool.push_back("junk" + std::to_string(i));
        }
        manifest.spec = spec;
    }

    std::string junk() { return junk_pool[rng() % junk_pool.size()]; }

    std::vector<std::string> bridge_body_terms(int n) {
        std::vector<std::string> out;
        while (static_cast<int>(out.size()) < n) {
            const std::string& t = kBridgeBodyPool[rng() % kBridgeBodyPool.size()];
            if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
        }
        return out;
    }

    std::set<std::pair<int, int>> used_title_pairs;

    std::string target_title() {
        for (;;) {
            int a = static_cast<int>(rng() % kTargetTitlePool);
            int b = static_cast<int>(rng() % kTargetTitlePool);
            if (a == b) continue;
            if (!used_title_pairs.insert({a, b}).second) continue;
            return "spur u" + std::to_string(a) + " u" + std::to_string(b);
        }
    }

    std::string answer_token() { return "ans" + std::to_string(rng() % kAnswerPool); }

    // A target-shaped paragraph: shared title prefix, the bridge-target
    // marker pair, body terms and an answer slot, all from shared pools.
    void add_target_like(const std::string& id, const std::string& title,
                         const std::string& answer,
                         std::vector<std::string> links = {}) {
        auto body = bridge_body_terms(3);
        add_paragraph(id, title,
                      {join({title, "bridgemark", "targetmark", body[0], body[1], body[2],
                             answer})},
                      std::move(links));
    }

    void add_paragraph(const std::string& id, const std::string& title,
                       std::vector<std::string> sentences,
                       std::vector<std::string> links = {}) {
        paragraphs.push_back({id, title, std::move(sentences), std::move(links)});
    }

    void make_bridge(int i) {
        std::string tag = std::to_string(i);
        // Two-token anchor title. Both question templates then carry exactly
        // two one-off title tokens, so not even the noise statistics of the
        // question text reveal the question type.
        std::string anchor = "anchor" + tag + "x anchor" + tag + "y";
        std::string target = target_title();      // title of B, mentioned only in A
        std::string answer = answer_token();
        std::string a_id = "bq" + tag + "a";
        std::string b_id = "bq" + tag + "b";
        std::vector<std::string> cterms;
        for (int k = 0; k < 3; ++k) cterms.push_back("q" + tag + "term" + std::to_string(k));

        bool forward = (rng() % 1000000) < static_cast<std::uint64_t>(
                           spec.link_direction_mix * 1000000.0);

        // The anchor body stays free of the title and question terms: the
        // anchor is already reachable through its title, and every one-off
        // token in a gold body ends up in the memory slot, where it is pure
        // noise on the test split.
        add_paragraph(a_id, anchor,
                      {join({"alphamark", "alphamark", "alphamark", junk()}),
                       join({"points", target})},
                      forward ? std::vector<std::string>{b_id} : std::vector<std::string>{});
        add_target_like(b_id, target, answer,
                        forward ? std::vector<std::string>{} : std::vector<std::string>{a_id});

        for (int j = 0; j < spec.n_distractors_per_question; ++j) {
            std::string did = "bq" + tag + "d" + std::to_string(j);
            add_paragraph(did, "dis" + tag + "x" + std::to_string(j),
                          {join({"dis" + tag + "x" + std::to_string(j), "distmark",
                                 cterms[j % 3], cterms[(j + 1) % 3], junk(), junk()})});
        }

        Question q;
        q.id = "bridge_q" + tag;
        // Token for token the same surface shape as comparison questions: two
        // title slots, three term slots. A length or vocabulary difference
        // between the templates would let a pointwise scorer infer the
        // question type.
        q.text = join({"about", "the", "pages", anchor, "report", "the",
                       "linked", "value", cterms[0], cterms[1], cterms[2]});
        q.answer = answer;
        q.qtype = QuestionType::bridge;
        q.gold_evidence = {a_id, b_id};
        questions.push_back(q);
        manifest.questions.push_back({q.id, q.qtype, q.gold_evidence, forward});
        if (!forward) ++manifest.backward_pairs;
    }

    void make_comparison(int i) {
        std::string tag = std::to_string(i);
        std::string left = "left" + tag;
        std::string right = "right" + tag;
        std::string answer = answer_token();
        std::string l_id = "cq" + tag + "l";
        std::string r_id = "cq" + tag + "r";
        std::vector<std::string> cterms;
        for (int k = 0; k < 3; ++k) cterms.push_back("c" + tag + "term" + std::to_string(k));

        add_paragraph(l_id, left,
                      {join({"compmark", "compmark", "compmark", answer})});
        add_paragraph(r_id, right,
                      {join({"compmark", "compmark", "compmark", junk()})});

        // Decoys are built from the same pools as bridge targets, so nothing
        // on the paragraph side separates them from a gold target; they are
        // never gold and enter the candidate set through distractor outlinks.
        std::vector<std::string> decoy_ids;
        for (int k = 0; k < spec.n_decoys_per_comparison; ++k) {
            std::string did = "cq" + tag + "n" + std::to_string(k);
            add_target_like(did, target_title(), answer_token());
            decoy_ids.push_back(did);
        }
        for (int j = 0; j < spec.n_distractors_per_question; ++j) {
            std::string did = "cq" + tag + "d" + std::to_string(j);
            // every distractor links every decoy: whichever distractors make
            // the seed set, the full decoy block lands in the candidates
            add_paragraph(did, "cdis" + tag + "x" + std::to_string(j),
                          {join({"cdis" + tag + "x" + std::to_string(j), "distmark",
                                 cterms[j % 3], cterms[(j + 1) % 3], junk(), junk()})},
                          decoy_ids);
        }

        Question q;
        q.id = "comparison_q" + tag;
        q.text = join({"about", "the", "pages", left, right, "report", "the",
                       "linked", "value", cterms[0], cterms[1], cterms[2]});
        q.answer = answer;
        q.qtype = QuestionType::comparison;
        q.gold_evidence = {l_id, r_id};
        questions.push_back(q);
        manifest.questions.push_back({q.id, q.qtype, q.gold_evidence, true});
    }

    void make_filler(int j) {
        std::string id = "f" + std::to_string(j);
        std::vector<std::string> links;
        if (j > 0 && rng() % 2 == 0) links.push_back("f" + std::to_string(rng() % j));
        add_paragraph(id, "filler" + std::to_string(j),
                      {join({"filler" + std::to_string(j), "fillmark", junk(), junk(),
                             junk()})},
                      links);
    }

    void split() {
        std::vector<std::string> bridge_ids, comparison_ids;
        for (const Question& q : questions) {
            (q.qtype == QuestionType::bridge ? bridge_ids : comparison_ids).push_back(q.id);
        }
        seeded_shuffle(bridge_ids, rng);
        seeded_shuffle(comparison_ids, rng);
        auto take = [&](std::vector<std::string>& ids) {
            std::size_t n_train = static_cast<std::size_t>(
                spec.train_fraction * static_cast<double>(ids.size()) + 0.5);
            for (std::size_t i = 0; i < ids.size(); ++i) {
                (i < n_train ? manifest.train_qids : manifest.test_qids).push_back(ids[i]);
            }
        };
        take(bridge_ids);
        take(comparison_ids);
        std::set<std::string> test_set(manifest.test_qids.begin(), manifest.test_qids.end());
        for (const SynthQuestionInfo& info : manifest.questions) {
            if (info.qtype == QuestionType::bridge && !info.forward_link &&
                test_set.count(info.qid)) {
                ++manifest.test_backward_pairs;
            }
        }
    }
};

}  // namespace

SynthSpec synth_spec_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open synth spec: " + path);
    json j = json::parse(in);
    SynthSpec s;
    s.seed = j.value("seed", s.seed);
    s.n_entities = j.value("n_entities", s.n_entities);
    s.n_bridge_questions = j.value("n_bridge_questions", s.n_bridge_questions);
    s.n_comparison_questions = j.value("n_comparison_questions", s.n_comparison_questions);
    s.n_distractors_per_question =
        j.value("n_distractors_per_question", s.n_distractors_per_question);
    s.n_decoys_per_comparison = j.value("n_decoys_per_comparison", s.n_decoys_per_comparison);
    s.vocab_size = j.value("vocab_size", s.vocab_size);
    s.link_direction_mix = j.value("link_direction_mix", s.link_direction_mix);
    s.train_fraction = j.value("train_fraction", s.train_fraction);
    return s;
}

namespace {

json spec_to_json(const SynthSpec& s) {
    return {{"seed", s.seed},
            {"n_entities", s.n_entities},
            {"n_bridge_questions", s.n_bridge_questions},
            {"n_comparison_questions", s.n_comparison_questions},
            {"n_distractors_per_question", s.n_distractors_per_question},
            {"n_decoys_per_comparison", s.n_decoys_per_comparison},
            {"vocab_size", s.vocab_size},
            {"link_direction_mix", s.link_direction_mix},
            {"train_fraction", s.train_fraction}};
}

}  // namespace

void save_manifest(const SynthManifest& m, const std::string& path) {
    json qs = json::array();
    for (const SynthQuestionInfo& q : m.questions) {
        qs.push_back({{"qid", q.qid},
                      {"qtype", to_string(q.qtype)},
                      {"gold", q.gold},
                      {"forward_link", q.forward_link}});
    }
    json j{{"spec", spec_to_json(m.spec)},
           {"questions", qs},
           {"train_qids", m.train_qids},
           {"test_qids", m.test_qids},
           {"backward_pairs", m.backward_pairs},
           {"test_backward_pairs", m.test_backward_pairs},
           {"paragraphs", m.paragraphs}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

SynthManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    json j = json::parse(in);
    SynthManifest m;
    const json& s = j.at("spec");
    m.spec.seed = s.at("seed").get<std::uint64_t>();
    m.spec.n_entities = s.at("n_entities").get<int>();
    m.spec.n_bridge_questions = s.at("n_bridge_questions").get<int>();
    m.spec.n_comparison_questions = s.at("n_comparison_questions").get<int>();
    m.spec.n_distractors_per_question = s.at("n_distractors_per_question").get<int>();
    m.spec.n_decoys_per_comparison = s.at("n_decoys_per_comparison").get<int>();
    m.spec.vocab_size = s.at("vocab_size").get<int>();
    m.spec.link_direction_mix = s.at("link_direction_mix").get<double>();
    m.spec.train_fraction = s.at("train_fraction").get<double>();
    for (const json& q : j.at("questions")) {
        m.questions.push_back({q.at("qid").get<std::string>(),
                               question_type_from_string(q.at("qtype").get<std::string>()),
                               q.at("gold").get<std::vector<std::string>>(),
                               q.at("forward_link").get<bool>()});
    }
    m.train_qids = j.at("train_qids").get<std::vector<std::string>>();
    m.test_qids = j.at("test_qids").get<std::vector<std::string>>();
    m.backward_pairs = j.at("backward_pairs").get<int>();
    m.test_backward_pairs = j.at("test_backward_pairs").get<int>();
    m.paragraphs = j.at("paragraphs").get<std::size_t>();
    return m;
}

SynthOutput generate(const SynthSpec& spec, const std::string& out_dir) {
    if (spec.vocab_size < 50) {
        throw std::runtime_error("synth spec: vocab_size too small to keep term pools apart");
    }
    if (spec.link_direction_mix < 0.0 || spec.link_direction_mix > 1.0) {
        throw std::runtime_error("synth spec: link_direction_mix must be in [0,1]");
    }
    if (spec.n_bridge_questions < 0 || spec.n_comparison_questions < 0 ||
        spec.n_entities < 0 || spec.n_distractors_per_question < 1 ||
        spec.n_decoys_per_comparison < 0) {
        throw std::runtime_error("synth spec: counts out of range");
    }

    Builder b(spec);
    for (int i = 0; i < spec.n_bridge_questions; ++i) b.make_bridge(i);
    for (int i = 0; i < spec.n_comparison_questions; ++i) b.make_comparison(i);
    for (int j = 0; j < spec.n_entities; ++j) b.make_filler(j);
    b.split();
    b.manifest.paragraphs = b.paragraphs.size();

    fs::create_directories(out_dir);
    SynthOutput out;
    out.corpus_path = (fs::path(out_dir) / "corpus.jsonl").string();
    out.questions_train_path = (fs::path(out_dir) / "questions_train.jsonl").string();
    out.questions_test_path = (fs::path(out_dir) / "questions_test.jsonl").string();
    out.manifest_path = (fs::path(out_dir) / "manifest.json").string();

    {
        std::ofstream corpus(out.corpus_path);
        for (const Paragraph& p : b.paragraphs) {
            json j{{"id", p.id},
                   {"title", p.title},
                   {"sentences", p.sentences},
                   {"links_out", p.links_out}};
            corpus << j.dump() << "\n";
        }
    }
    std::set<std::string> train_set(b.manifest.train_qids.begin(),
                                    b.manifest.train_qids.end());
    std::vector<Question> train_qs, test_qs;
    for (const Question& q : b.questions) {
        (train_set.count(q.id) ? train_qs : test_qs).push_back(q);
    }
    serialize_questions(train_qs, out.questions_train_path);
    serialize_questions(test_qs, out.questions_test_path);
    save_manifest(b.manifest, out.manifest_path);
    out.manifest = b.manifest;
    return out;
}

}  // namespace gmf
