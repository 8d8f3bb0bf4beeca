#include "gmf/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

using nlohmann::json;

namespace gmf {

std::string to_string(QuestionType t) {
    return t == QuestionType::bridge ? "bridge" : "comparison";
}

QuestionType question_type_from_string(const std::string& s) {
    if (s == "bridge") return QuestionType::bridge;
    if (s == "comparison") return QuestionType::comparison;
    throw MalformedRecordError("unknown qtype: " + s);
}

const Paragraph* CorpusStore::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &paragraphs_[it->second];
}

const Paragraph& CorpusStore::at(const std::string& id) const {
    const Paragraph* p = find(id);
    if (!p) throw std::runtime_error("unknown paragraph id: " + id);
    return *p;
}

void CorpusStore::add(Paragraph p) {
    if (p.id.empty()) throw MalformedRecordError("paragraph with empty id");
    if (by_id_.count(p.id)) throw std::runtime_error("duplicate paragraph id: " + p.id);
    // A paragraph cannot be its own hop.
    auto it = std::remove(p.links_out.begin(), p.links_out.end(), p.id);
    if (it != p.links_out.end()) {
        stats_.self_links_dropped += static_cast<std::size_t>(p.links_out.end() - it);
        p.links_out.erase(it, p.links_out.end());
    }
    by_id_[p.id] = paragraphs_.size();
    paragraphs_.push_back(std::move(p));
}

void CorpusStore::finalize() {
    graph_.out_edges.clear();
    graph_.in_edges.clear();
    stats_.paragraphs = paragraphs_.size();
    stats_.dangling_links = 0;
    for (const Paragraph& p : paragraphs_) {
        for (const std::string& dst : p.links_out) {
            if (!by_id_.count(dst)) {
                // Dangling links stay in links_out but never become edges.
                ++stats_.dangling_links;
                continue;
            }
            graph_.out_edges[p.id].insert(dst);
            graph_.in_edges[dst].insert(p.id);
        }
    }
}

namespace {

json parse_line(const std::string& line, std::size_t lineno, const std::string& path) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw MalformedRecordError(path + ":" + std::to_string(lineno) +
                                   ": malformed JSON record");
    }
    return j;
}

std::string require_string(const json& j, const char* key, std::size_t lineno,
                           const std::string& path) {
    if (!j.contains(key) || !j[key].is_string()) {
        throw MalformedRecordError(path + ":" + std::to_string(lineno) +
                                   ": missing or non-string field \"" + key + "\"");
    }
    return j[key].get<std::string>();
}

std::vector<std::string> require_string_array(const json& j, const char* key,
                                              std::size_t lineno, const std::string& path) {
    if (!j.contains(key) || !j[key].is_array()) {
        throw MalformedRecordError(path + ":" + std::to_string(lineno) +
                                   ": missing or non-array field \"" + key + "\"");
    }
    std::vector<std::string> out;
    for (const auto& e : j[key]) {
        if (!e.is_string()) {
            throw MalformedRecordError(path + ":" + std::to_string(lineno) +
                                       ": non-string element in \"" + key + "\"");
        }
        out.push_back(e.get<std::string>());
    }
    return out;
}

}  // namespace

CorpusStore ingest_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    CorpusStore store;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = parse_line(line, lineno, path);
        Paragraph p;
        p.id = require_string(j, "id", lineno, path);
        p.title = require_string(j, "title", lineno, path);
        p.sentences = require_string_array(j, "sentences", lineno, path);
        p.links_out = require_string_array(j, "links_out", lineno, path);
        store.add(std::move(p));
    }
    if (store.size() == 0) throw std::runtime_error("empty corpus file: " + path);
    store.finalize();
    return store;
}

void serialize_corpus(const CorpusStore& store, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write corpus file: " + path);
    for (const Paragraph& p : store.paragraphs()) {
        json j{{"id", p.id},
               {"title", p.title},
               {"sentences", p.sentences},
               {"links_out", p.links_out}};
        out << j.dump() << "\n";
    }
}

QuestionIngestResult ingest_questions(const std::string& path, const CorpusStore& store,
                                      bool strict) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open question file: " + path);
    QuestionIngestResult result;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = parse_line(line, lineno, path);
        Question q;
        q.id = require_string(j, "id", lineno, path);
        q.text = require_string(j, "text", lineno, path);
        q.answer = require_string(j, "answer", lineno, path);
        q.qtype = question_type_from_string(require_string(j, "qtype", lineno, path));
        q.gold_evidence = require_string_array(j, "gold_evidence", lineno, path);
        if (!seen_ids.insert(q.id).second) {
            throw std::runtime_error("duplicate question id: " + q.id);
        }
        bool resolved = true;
        for (const std::string& gid : q.gold_evidence) {
            if (!store.contains(gid)) {
                if (strict) {
                    throw std::runtime_error("question " + q.id + ": gold evidence id \"" +
                                             gid + "\" not in corpus");
                }
                resolved = false;
            }
        }
        if (!resolved) {
            ++result.skipped;
            continue;
        }
        result.questions.push_back(std::move(q));
    }
    return result;
}

void serialize_questions(const std::vector<Question>& qs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write question file: " + path);
    for (const Question& q : qs) {
        json j{{"id", q.id},
               {"text", q.text},
               {"answer", q.answer},
               {"qtype", to_string(q.qtype)},
               {"gold_evidence", q.gold_evidence}};
        out << j.dump() << "\n";
    }
}

}  // namespace gmf
