#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "gmf/term_retrieval.hpp"

using namespace gmf;
namespace fs = std::filesystem;

namespace {

CorpusStore make_store(std::vector<Paragraph> paras) {
    CorpusStore store;
    for (Paragraph& p : paras) store.add(std::move(p));
    store.finalize();
    return store;
}

// Independent straight-line TF-IDF, recomputed from raw text without touching
// InvertedIndex internals beyond tokenize.
double brute_tfidf(const std::string& question, const Paragraph& p, const CorpusStore& store) {
    auto doc_text = [](const Paragraph& d) {
        std::string text = d.title;
        for (const std::string& s : d.sentences) text += " " + s;
        return text;
    };
    std::map<std::string, int> doc_tf;
    for (const std::string& t : tokenize(doc_text(p))) ++doc_tf[t];
    std::map<std::string, int> q_tf;
    for (const std::string& t : tokenize(question)) ++q_tf[t];
    double n = static_cast<double>(store.size());
    double score = 0.0;
    for (const auto& [term, qcount] : q_tf) {
        auto it = doc_tf.find(term);
        if (it == doc_tf.end()) continue;
        double df = 0.0;
        for (const Paragraph& d : store.paragraphs()) {
            std::vector<std::string> toks = tokenize(doc_text(d));
            if (std::find(toks.begin(), toks.end(), term) != toks.end()) df += 1.0;
        }
        if (df == 0.0) continue;  // term absent from the corpus entirely
        double w = std::max(0.0, std::log((n - df + 0.5) / (df + 0.5)));
        score += std::log1p(static_cast<double>(qcount)) * w *
                 std::log1p(static_cast<double>(it->second)) * w;
    }
    return score;
}

// Deterministic fixture corpus with repeated and rare terms.
CorpusStore random_store(std::mt19937_64& rng, int n_docs) {
    std::vector<std::string> words = {"red",  "blue", "green", "stone", "river",
                                      "hill", "bird", "metal", "cloud", "grain"};
    std::vector<Paragraph> paras;
    for (int i = 0; i < n_docs; ++i) {
        Paragraph p;
        p.id = "p" + std::to_string(i);
        p.title = words[rng() % words.size()] + " " + words[rng() % words.size()];
        int n_sent = 1 + static_cast<int>(rng() % 3);
        for (int s = 0; s < n_sent; ++s) {
            std::string sent;
            int n_words = 3 + static_cast<int>(rng() % 5);
            for (int w = 0; w < n_words; ++w) {
                if (!sent.empty()) sent += " ";
                sent += words[rng() % words.size()];
            }
            p.sentences.push_back(sent);
        }
        paras.push_back(std::move(p));
    }
    return make_store(std::move(paras));
}

}  // namespace

TEST_CASE("tokenize lowercases, splits on non-alphanumerics, appends bigrams") {
    CHECK(tokenize_unigrams("Red-Stone river!") ==
          std::vector<std::string>{"red", "stone", "river"});
    CHECK(tokenize("Red-Stone river") ==
          std::vector<std::string>{"red", "stone", "river", "red_stone", "stone_river"});
    CHECK(tokenize("solo") == std::vector<std::string>{"solo"});
    CHECK(tokenize("").empty());
    CHECK(tokenize_unigrams("a1 B2") == std::vector<std::string>{"a1", "b2"});
}

TEST_CASE("build_index counts document frequency and sorts postings by pid") {
    CorpusStore store = make_store({{"p2", "red stone", {"red river"}, {}},
                                    {"p1", "blue stone", {"stone stone"}, {}},
                                    {"p3", "red", {}, {}}});
    InvertedIndex index = build_index(store);
    CHECK(index.doc_count == 3);
    int red = index.term_id("red");
    REQUIRE(red >= 0);
    CHECK(index.doc_freq[red] == 2);
    CHECK(index.postings[red].size() == 2);
    CHECK(index.postings[red][0].first == "p2");  // pid order, not file order
    CHECK(index.postings[red][1].first == "p3");
    int stone = index.term_id("stone");
    REQUIRE(stone >= 0);
    CHECK(index.doc_terms.at("p1").at(stone) == 3);  // title + doubled sentence
    CHECK(index.term_id("absent") == -1);
    CHECK(index.term_id("red_stone") >= 0);  // bigrams are indexed
    CHECK_THROWS_AS(build_index(CorpusStore{}), std::runtime_error);
}

TEST_CASE("tfidf_score matches the brute-force recomputation") {
    std::mt19937_64 rng(11);
    CorpusStore store = random_store(rng, 40);
    InvertedIndex index = build_index(store);
    std::vector<std::string> queries = {"red stone", "river bird cloud", "metal metal grain",
                                        "unknownword", "blue"};
    for (const std::string& q : queries) {
        std::vector<std::string> terms = tokenize(q);
        for (const Paragraph& p : store.paragraphs()) {
            double got = tfidf_score(terms, p.id, index);
            double want = brute_tfidf(q, p, store);
            CHECK(std::abs(got - want) <= 1e-12);
        }
    }
    CHECK_THROWS_AS(tfidf_score(tokenize("red"), "nosuch", index), std::runtime_error);
}

TEST_CASE("idf is clamped at zero for very common terms") {
    // "common" is in every doc; N - df + 0.5 < df + 0.5 so raw idf < 0.
    CorpusStore store = make_store({{"p1", "common", {"common one"}, {}},
                                    {"p2", "common", {"common two"}, {}},
                                    {"p3", "common", {"common three"}, {}}});
    InvertedIndex index = build_index(store);
    CHECK(tfidf_score({"common"}, "p1", index) == 0.0);
}

TEST_CASE("retrieve_tfidf matches brute-force score-and-sort including tie order") {
    std::mt19937_64 rng(23);
    CorpusStore store = random_store(rng, 60);
    InvertedIndex index = build_index(store);
    Question q{"q", "red stone river", "x", QuestionType::bridge, {}};
    std::vector<std::string> q_terms = tokenize(q.text);

    std::vector<std::pair<double, std::string>> brute;
    for (const Paragraph& p : store.paragraphs()) {
        double s = brute_tfidf(q.text, p, store);
        if (s > 0.0) brute.emplace_back(s, p.id);
    }
    std::stable_sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int limit : {3, 10, 1000}) {
        std::vector<std::string> got = retrieve_tfidf(q, index, limit);
        std::vector<std::string> want;
        for (const auto& [s, pid] : brute) {
            if (static_cast<int>(want.size()) >= limit) break;
            want.push_back(pid);
        }
        CHECK(got == want);
    }
}

TEST_CASE("retrieve_kwm requires the title as a contiguous question subsequence") {
    CorpusStore store = make_store({{"p1", "red stone", {"red stone is a rock"}, {}},
                                    {"p2", "stone river", {"a stream"}, {}},
                                    {"p3", "red river", {"nope"}, {}},
                                    {"p4", "red stone river valley plain", {"too long"}, {}}});
    InvertedIndex index = build_index(store);
    Question q{"q", "where is the red stone river", "x", QuestionType::bridge, {}};
    std::vector<std::string> got = retrieve_kwm(q, index, store, 10);
    // "red river" is present in the question only non-contiguously; p4's title
    // is longer than its contiguous window.
    CHECK(std::find(got.begin(), got.end(), "p1") != got.end());
    CHECK(std::find(got.begin(), got.end(), "p2") != got.end());
    CHECK(std::find(got.begin(), got.end(), "p3") == got.end());
    CHECK(std::find(got.begin(), got.end(), "p4") == got.end());
    // ranked by TF-IDF within the matches
    for (std::size_t i = 0; i + 1 < got.size(); ++i) {
        CHECK(tfidf_score(tokenize(q.text), got[i], index) >=
              tfidf_score(tokenize(q.text), got[i + 1], index));
    }
    CHECK(retrieve_kwm(q, index, store, 1).size() == 1);
}

TEST_CASE("expand_hyperlinks walks both directions and never re-emits seeds") {
    HyperlinkGraph g;
    g.out_edges["a"] = {"b", "c"};
    g.in_edges["b"] = {"a"};
    g.in_edges["c"] = {"a"};
    g.out_edges["d"] = {"a"};
    g.in_edges["a"] = {"d"};

    SUBCASE("bidirectional from a: out-neighbors then in-neighbors") {
        CHECK(expand_hyperlinks({"a"}, g) == std::vector<std::string>{"b", "c", "d"});
    }
    SUBCASE("forward-only drops in-neighbors") {
        CHECK(expand_hyperlinks({"a"}, g, true) == std::vector<std::string>{"b", "c"});
        CHECK(expand_hyperlinks({"b"}, g, true).empty());
        CHECK(expand_hyperlinks({"b"}, g) == std::vector<std::string>{"a"});
    }
    SUBCASE("seeds are excluded from the expansion") {
        CHECK(expand_hyperlinks({"a", "b"}, g) == std::vector<std::string>{"c", "d"});
    }
    SUBCASE("duplicate seeds and shared neighbors are emitted once") {
        CHECK(expand_hyperlinks({"a", "a", "d"}, g) == std::vector<std::string>{"b", "c"});
    }
    SUBCASE("unknown seeds expand to nothing") {
        CHECK(expand_hyperlinks({"zzz"}, g).empty());
    }
}

TEST_CASE("build_candidate_set merges sources first-wins with per-source ranks") {
    // p1 matches by title and scores high on TF-IDF; p2 only via TF-IDF;
    // p3 only via p1's outlink.
    CorpusStore store = make_store({{"p1", "red stone", {"red stone red stone"}, {"p3"}},
                                    {"p2", "other", {"red stone lore"}, {}},
                                    {"p3", "target", {"linked page"}, {}},
                                    {"p4", "filler", {"nothing here"}, {}},
                                    {"p5", "pad one", {"east wind"}, {}},
                                    {"p6", "pad two", {"west wind"}, {}},
                                    {"p7", "pad three", {"north wind"}, {}},
                                    {"p8", "pad four", {"south wind"}, {}}});
    InvertedIndex index = build_index(store);
    Question q{"q", "tell me about red stone", "x", QuestionType::bridge, {}};
    CandidateSet cs = build_candidate_set(q, store, index, store.graph(), 10, 10);
    CHECK(cs.qid == "q");

    std::map<std::string, CandidateSource> src;
    std::map<std::string, int> rank;
    for (const CandidateEntry& e : cs.entries) {
        CHECK(src.emplace(e.pid, e.source).second);  // no duplicate pids
        rank[e.pid] = e.rank;
    }
    REQUIRE(src.count("p1"));
    REQUIRE(src.count("p2"));
    REQUIRE(src.count("p3"));
    CHECK(src["p1"] == CandidateSource::kwm);  // kwm wins over its tfidf hit
    CHECK(src["p2"] == CandidateSource::tfidf);
    CHECK(src["p3"] == CandidateSource::hyperlink);
    CHECK(rank["p1"] == 0);
    CHECK(cs.contains("p1"));
    CHECK_FALSE(cs.contains("p4"));
    CHECK(cs.ids().size() == cs.entries.size());

    SUBCASE("forward-only flag reaches the link expansion") {
        // p3 -> p1 backward edge only: candidate set loses p3.
        CorpusStore store2 = make_store({{"p1", "red stone", {"red stone red stone"}, {}},
                                         {"p3", "target", {"linked"}, {"p1"}}});
        InvertedIndex index2 = build_index(store2);
        CandidateSet with = build_candidate_set(q, store2, index2, store2.graph(), 5, 5, false);
        CandidateSet without =
            build_candidate_set(q, store2, index2, store2.graph(), 5, 5, true);
        CHECK(with.contains("p3"));
        CHECK_FALSE(without.contains("p3"));
    }
}

TEST_CASE("index round-trips through save_index and load_index") {
    std::mt19937_64 rng(31);
    CorpusStore store = random_store(rng, 25);
    InvertedIndex index = build_index(store);
    fs::path d = fs::temp_directory_path() / "gmf_test_index";
    fs::create_directories(d);
    std::string path = (d / "index.jsonl").string();
    save_index(index, path);
    InvertedIndex loaded = load_index(path);

    CHECK(loaded.doc_count == index.doc_count);
    CHECK(loaded.vocab == index.vocab);
    CHECK(loaded.doc_freq == index.doc_freq);
    CHECK(loaded.doc_terms == index.doc_terms);
    Question q{"q", "red stone river bird", "x", QuestionType::bridge, {}};
    CHECK(retrieve_tfidf(q, loaded, 10) == retrieve_tfidf(q, index, 10));
    for (const Paragraph& p : store.paragraphs()) {
        CHECK(tfidf_score(tokenize(q.text), p.id, loaded) ==
              tfidf_score(tokenize(q.text), p.id, index));
    }

    std::ofstream((d / "bad.jsonl").string()) << "{\"format\":\"other\"}\n";
    CHECK_THROWS_AS(load_index((d / "bad.jsonl").string()), std::runtime_error);
}
