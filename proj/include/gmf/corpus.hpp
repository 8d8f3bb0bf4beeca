#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmf {

struct Paragraph {
    std::string id;
    std::string title;
    std::vector<std::string> sentences;
    std::vector<std::string> links_out;  // may contain dangling ids
};

enum class QuestionType { bridge, comparison };

std::string to_string(QuestionType t);
QuestionType question_type_from_string(const std::string& s);

struct Question {
    std::string id;
    std::string text;
    std::string answer;  // may be "yes"/"no"
    QuestionType qtype = QuestionType::bridge;
    std::vector<std::string> gold_evidence;
};

// in_edges is always the exact transpose of out_edges.
struct HyperlinkGraph {
    std::map<std::string, std::set<std::string>> out_edges;
    std::map<std::string, std::set<std::string>> in_edges;
};

struct IngestStats {
    std::size_t paragraphs = 0;
    std::size_t self_links_dropped = 0;
    std::size_t dangling_links = 0;
};

class CorpusStore {
public:
    const Paragraph* find(const std::string& id) const;
    const Paragraph& at(const std::string& id) const;
    bool contains(const std::string& id) const { return by_id_.count(id) != 0; }

    // Paragraphs in file order.
    const std::vector<Paragraph>& paragraphs() const { return paragraphs_; }
    const HyperlinkGraph& graph() const { return graph_; }
    const IngestStats& stats() const { return stats_; }
    std::size_t size() const { return paragraphs_.size(); }

    void add(Paragraph p);       // throws on duplicate id; drops self-links
    void finalize();             // builds the link graph, counts dangling links

private:
    std::vector<Paragraph> paragraphs_;
    std::map<std::string, std::size_t> by_id_;
    HyperlinkGraph graph_;
    IngestStats stats_;
};

struct MalformedRecordError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

CorpusStore ingest_corpus(const std::string& path);
void serialize_corpus(const CorpusStore& store, const std::string& path);

struct QuestionIngestResult {
    std::vector<Question> questions;
    std::size_t skipped = 0;  // lenient mode only
};

QuestionIngestResult ingest_questions(const std::string& path, const CorpusStore& store,
                                      bool strict);
void serialize_questions(const std::vector<Question>& qs, const std::string& path);

}  // namespace gmf
