#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "gmf/inference_eval.hpp"

using namespace gmf;

namespace {

TokenVocab eval_vocab() {
    TokenVocab v;
    for (const char* t : {"red", "stone", "river", "bird", "cloud", "find", "the"}) v.add(t);
    return v;
}

ModelParams eval_params(const TokenVocab& vocab, std::uint64_t seed = 19) {
    ModelConfig cfg;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.max_len = 24;
    cfg.seed = seed;
    return ModelParams::init(cfg, vocab.size());
}

std::vector<Paragraph> many_paragraphs(int n) {
    const char* words[] = {"red", "stone", "river", "bird", "cloud"};
    std::vector<Paragraph> out;
    for (int i = 0; i < n; ++i) {
        out.push_back({"p" + std::to_string(i), words[i % 5],
                       {std::string(words[(i + 1) % 5]) + " " + words[(i + 2) % 5]},
                       {}});
    }
    return out;
}

std::vector<const Paragraph*> ptrs(const std::vector<Paragraph>& ps) {
    std::vector<const Paragraph*> out;
    for (const Paragraph& p : ps) out.push_back(&p);
    return out;
}

std::vector<ScoredParagraph> scored_fixture() {
    return {{"a", 0.9, true, {}},
            {"b", 0.7, true, {}},
            {"c", 0.7, false, {}},
            {"d", 0.5, false, {}},
            {"e", 0.2, false, {}}};
}

// The 5-question hand fixture shared with the acceptance metric oracle.
struct MetricFixture {
    CorpusStore store;
    std::vector<Question> questions;
    std::vector<RetrievalResult> results;
    std::vector<CandidateSet> candidates;

    MetricFixture() {
        store.add({"A", "Alpha", {"plain body"}, {}});
        store.add({"B", "Beta", {"the capital is Tokyo"}, {}});
        store.add({"C", "Gamma", {"gamma body"}, {}});
        store.add({"D", "Delta", {"delta body"}, {}});
        store.add({"L", "Left", {"left body"}, {}});
        store.add({"R", "Right", {"right body"}, {}});
        store.finalize();
        questions = {
            {"q1", "t", "zz1", QuestionType::bridge, {"A", "B"}},
            {"q2", "t", "tokyo", QuestionType::bridge, {"A", "B"}},
            {"q3", "t", "zz3", QuestionType::bridge, {"C", "D"}},
            {"q4", "t", "yes", QuestionType::comparison, {"L", "R"}},
            {"q5", "t", "paris", QuestionType::comparison, {"L", "R"}}};
        results = {
            {"q1", {{"A", 0.9}, {"C", 0.8}}, 10},
            {"q2", {{"A", 0.9}, {"B", 0.8}}, 10},
            {"q3", {}, 10},
            {"q4", {{"L", 0.9}, {"R", 0.8}, {"C", 0.7}}, 10},
            {"q5", {{"R", 0.9}}, 10}};
        candidates = {cand("q1", {"A", "B"}), cand("q2", {"A"}), cand("q3", {"C"}),
                      cand("q4", {"L", "R"}), cand("q5", {"L", "R"})};
    }

    static CandidateSet cand(const std::string& qid, std::vector<std::string> pids) {
        CandidateSet cs;
        cs.qid = qid;
        int rank = 0;
        for (std::string& pid : pids)
            cs.entries.push_back({std::move(pid), CandidateSource::kwm, rank++});
        return cs;
    }
};

}  // namespace

TEST_CASE("select_paragraphs keeps scores strictly above the threshold") {
    RetrievalResult r = select_paragraphs("q", scored_fixture(), 10, 0.5);
    REQUIRE(r.retrieved.size() == 3);  // d's 0.5 is not strictly above 0.5
    CHECK(r.retrieved[0].first == "a");
    CHECK(r.retrieved[1].first == "b");
    CHECK(r.retrieved[2].first == "c");
    CHECK(r.qid == "q");
    CHECK(r.candidate_size == 5);
}

TEST_CASE("select_paragraphs breaks score ties by candidate position") {
    std::vector<ScoredParagraph> scored{{"x", 0.6, false, {}},
                                        {"y", 0.8, false, {}},
                                        {"z", 0.6, false, {}}};
    RetrievalResult r = select_paragraphs("q", scored, 10, 0.0);
    REQUIRE(r.retrieved.size() == 3);
    CHECK(r.retrieved[0].first == "y");
    CHECK(r.retrieved[1].first == "x");  // x precedes z in the candidate order
    CHECK(r.retrieved[2].first == "z");
}

TEST_CASE("select_paragraphs truncates to n_retri") {
    RetrievalResult r = select_paragraphs("q", scored_fixture(), 2, 0.0);
    REQUIRE(r.retrieved.size() == 2);
    CHECK(r.retrieved[0].first == "a");
    CHECK(r.retrieved[1].first == "b");
    CHECK(select_paragraphs("q", {}, 4, 0.5).retrieved.empty());
    CHECK(select_paragraphs("q", scored_fixture(), 4, 0.95).retrieved.empty());
}

TEST_CASE("evaluate matches the hand-computed 5-question fixture") {
    MetricFixture f;
    MetricsReport r = evaluate(f.results, f.questions, f.store, &f.candidates);

    CHECK(r.questions == 5);
    // q1: gold {A,B}, retrieved [A,C] -> PR 1, P EM 0, precision 0.5
    CHECK(r.paragraph_recall == doctest::Approx(4.0 / 5.0).epsilon(1e-12));
    CHECK(r.p_em == doctest::Approx(2.0 / 5.0).epsilon(1e-12));
    CHECK(r.precision ==
          doctest::Approx((0.5 + 1.0 + 0.0 + 2.0 / 3.0 + 1.0) / 5.0).epsilon(1e-12));
    CHECK(r.precision_micro == doctest::Approx(6.0 / 8.0).epsilon(1e-12));
    CHECK(r.mean_retrieved_count == doctest::Approx(8.0 / 5.0).epsilon(1e-12));

    // q4's yes/no answer leaves 4 span questions; only q2's answer appears
    // (case-insensitively) in its retrieved text
    CHECK(r.span_questions == 4);
    CHECK(r.answer_recall == doctest::Approx(1.0 / 4.0).epsilon(1e-12));

    CHECK(r.candidate_recall == doctest::Approx(8.0 / 10.0).epsilon(1e-12));
    CHECK(r.candidate_recall_macro ==
          doctest::Approx((1.0 + 0.5 + 0.5 + 1.0 + 1.0) / 5.0).epsilon(1e-12));

    CHECK(r.bridge.count == 3);
    CHECK(r.bridge.pr == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.bridge.p_em == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(r.bridge.precision == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.comparison.count == 2);
    CHECK(r.comparison.pr == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.comparison.p_em == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.comparison.precision == doctest::Approx((2.0 / 3.0 + 1.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("P EM counts questions whose golds are all retrieved") {
    // extra retrieved paragraphs beyond the golds do not break P EM (q4 in the
    // fixture retrieves a third paragraph and still counts)
    MetricFixture f;
    MetricsReport r = evaluate({f.results[3]}, f.questions, f.store, nullptr);
    CHECK(r.p_em == 1.0);
    CHECK(r.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("evaluate rejects results without a matching question") {
    MetricFixture f;
    std::vector<RetrievalResult> orphan{{"nosuch", {}, 0}};
    CHECK_THROWS_AS(evaluate(orphan, f.questions, f.store, nullptr), std::runtime_error);
}

TEST_CASE("scores are invariant to chunk size") {
    TokenVocab vocab = eval_vocab();
    ModelParams params = eval_params(vocab);
    std::vector<Paragraph> ps = many_paragraphs(23);
    Question q{"q", "find the red stone", "x", QuestionType::bridge, {}};

    std::vector<ScoredParagraph> base =
        score_candidates_chunked(params, vocab, q, ptrs(ps), 1, 0.2, true);
    for (int chunk : {2, 4, 7, 16, 64}) {
        std::vector<ScoredParagraph> other =
            score_candidates_chunked(params, vocab, q, ptrs(ps), chunk, 0.2, true);
        REQUIRE(other.size() == base.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
            CHECK(other[i].pid == base[i].pid);
            CHECK(other[i].score == base[i].score);  // bitwise
            CHECK(other[i].written == base[i].written);
        }
    }
    CHECK_THROWS_AS(score_candidates_chunked(params, vocab, q, ptrs(ps), 0, 0.2, true),
                    std::runtime_error);
}

TEST_CASE("chunked scoring with an oversize gate matches memoryless scoring") {
    TokenVocab vocab = eval_vocab();
    ModelParams params = eval_params(vocab);
    std::vector<Paragraph> ps = many_paragraphs(9);
    Question q{"q", "find the river bird", "x", QuestionType::bridge, {}};
    std::vector<ScoredParagraph> gated =
        score_candidates_chunked(params, vocab, q, ptrs(ps), 4, 1.5, true);
    Vec zero(params.config.dim, 0.0);
    for (std::size_t i = 0; i < ps.size(); ++i) {
        Encoding enc = encode(params, vocab, q.text, ps[i], params.config.max_len);
        CHECK(gated[i].score == score_paragraph(params, enc.x, zero));
        CHECK_FALSE(gated[i].written);
    }
}

TEST_CASE("report JSON round-trips every field") {
    MetricFixture f;
    MetricsReport r = evaluate(f.results, f.questions, f.store, &f.candidates);
    MetricsReport back = parse_report_json(render_report_json(r));
    CHECK(back.questions == r.questions);
    CHECK(back.span_questions == r.span_questions);
    CHECK(back.answer_recall == r.answer_recall);
    CHECK(back.paragraph_recall == r.paragraph_recall);
    CHECK(back.p_em == r.p_em);
    CHECK(back.precision == r.precision);
    CHECK(back.precision_micro == r.precision_micro);
    CHECK(back.candidate_recall == r.candidate_recall);
    CHECK(back.candidate_recall_macro == r.candidate_recall_macro);
    CHECK(back.mean_retrieved_count == r.mean_retrieved_count);
    CHECK(back.bridge.count == r.bridge.count);
    CHECK(back.bridge.p_em == r.bridge.p_em);
    CHECK(back.comparison.precision == r.comparison.precision);

    std::string text = render_report_text(r);
    CHECK(text.find("p_em") != std::string::npos);
    CHECK(text.find("mean_retrieved_count") != std::string::npos);
}
