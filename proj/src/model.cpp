#include "gmf/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "gmf/term_retrieval.hpp"

namespace gmf {

TokenVocab::TokenVocab() {
    for (const char* s : {"<pad>", "<unk>", "<q>", "<sep>"}) add(s);
}

int TokenVocab::lookup(const std::string& term) const {
    auto it = index_.find(term);
    return it == index_.end() ? kUnk : it->second;
}

int TokenVocab::add(const std::string& term) {
    auto [it, inserted] = index_.try_emplace(term, static_cast<int>(terms_.size()));
    if (inserted) terms_.push_back(term);
    return it->second;
}

TokenVocab TokenVocab::build(const CorpusStore& store, const std::vector<Question>& questions) {
    std::set<std::string> terms;
    for (const Paragraph& p : store.paragraphs()) {
        for (const std::string& t : tokenize_unigrams(p.title)) terms.insert(t);
        for (const std::string& s : p.sentences) {
            for (const std::string& t : tokenize_unigrams(s)) terms.insert(t);
        }
    }
    for (const Question& q : questions) {
        for (const std::string& t : tokenize_unigrams(q.text)) terms.insert(t);
    }
    TokenVocab vocab;
    for (const std::string& t : terms) vocab.add(t);
    return vocab;
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::size_t vocab_size) {
    if (cfg.heads <= 0 || cfg.dim % cfg.heads != 0) {
        throw std::runtime_error("head count must divide dim");
    }
    ModelParams p;
    p.config = cfg;
    int d = cfg.dim;
    int dh = d / cfg.heads;
    p.embeddings = Mat(vocab_size, d);
    p.enc_affine = Mat(d, d);
    p.enc_bias = Vec(d, 0.0);
    for (int i = 0; i < cfg.heads; ++i) {
        p.w_query.emplace_back(dh, d);
        p.w_key.emplace_back(dh, d);
        p.w_value.emplace_back(dh, d);
    }
    p.w_out = Mat(d, d);
    p.w_input = Mat(d, d);
    p.w_score = Vec(d, 0.0);

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (Mat* m : p.matrices()) {
        for (double& v : m->a) v = u(rng);
    }
    for (Vec* v : p.vectors()) {
        for (double& x : *v) x = u(rng);
    }
    return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
    ModelParams p = other;
    for (Mat* m : p.matrices()) m->zero();
    for (Vec* v : p.vectors()) std::fill(v->begin(), v->end(), 0.0);
    return p;
}

std::vector<Mat*> ModelParams::matrices() {
    std::vector<Mat*> out{&embeddings, &enc_affine};
    for (Mat& m : w_query) out.push_back(&m);
    for (Mat& m : w_key) out.push_back(&m);
    for (Mat& m : w_value) out.push_back(&m);
    out.push_back(&w_out);
    out.push_back(&w_input);
    return out;
}

std::vector<const Mat*> ModelParams::matrices() const {
    auto mut = const_cast<ModelParams*>(this)->matrices();
    return {mut.begin(), mut.end()};
}

std::vector<Vec*> ModelParams::vectors() { return {&enc_bias, &w_score}; }

std::vector<const Vec*> ModelParams::vectors() const {
    auto mut = const_cast<ModelParams*>(this)->vectors();
    return {mut.begin(), mut.end()};
}

std::vector<double> ModelParams::flatten() const {
    std::vector<double> flat;
    for (const Mat* m : matrices()) flat.insert(flat.end(), m->a.begin(), m->a.end());
    for (const Vec* v : vectors()) flat.insert(flat.end(), v->begin(), v->end());
    return flat;
}

void ModelParams::unflatten(const std::vector<double>& flat) {
    std::size_t pos = 0;
    for (Mat* m : matrices()) {
        std::copy(flat.begin() + pos, flat.begin() + pos + m->a.size(), m->a.begin());
        pos += m->a.size();
    }
    for (Vec* v : vectors()) {
        std::copy(flat.begin() + pos, flat.begin() + pos + v->size(), v->begin());
        pos += v->size();
    }
    if (pos != flat.size()) throw std::runtime_error("unflatten: size mismatch");
}

namespace {

constexpr char kMagic[8] = {'G', 'M', 'F', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ofstream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
}

std::uint64_t read_u64(std::ifstream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void write_doubles(std::ofstream& out, const double* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 8));
}

void read_doubles(std::ifstream& in, double* p, std::size_t n) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 8));
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, 8);
    write_u64(out, static_cast<std::uint64_t>(ckpt.params.config.dim));
    write_u64(out, static_cast<std::uint64_t>(ckpt.params.config.heads));
    write_u64(out, static_cast<std::uint64_t>(ckpt.params.config.max_len));
    write_u64(out, ckpt.params.config.seed);
    write_u64(out, ckpt.vocab.size());
    for (const std::string& term : ckpt.vocab.terms()) {
        write_u64(out, term.size());
        out.write(term.data(), static_cast<std::streamsize>(term.size()));
    }
    for (const Mat* m : ckpt.params.matrices()) write_doubles(out, m->a.data(), m->a.size());
    for (const Vec* v : ckpt.params.vectors()) write_doubles(out, v->data(), v->size());
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || !std::equal(magic, magic + 8, kMagic)) {
        throw std::runtime_error("bad checkpoint header: " + path);
    }
    ModelConfig cfg;
    cfg.dim = static_cast<int>(read_u64(in));
    cfg.heads = static_cast<int>(read_u64(in));
    cfg.max_len = static_cast<int>(read_u64(in));
    cfg.seed = read_u64(in);
    std::uint64_t vocab_size = read_u64(in);
    Checkpoint ckpt;
    for (std::uint64_t i = 0; i < vocab_size; ++i) {
        std::uint64_t len = read_u64(in);
        std::string term(len, '\0');
        in.read(term.data(), static_cast<std::streamsize>(len));
        if (i >= 4) ckpt.vocab.add(term);  // specials are pre-seeded by the constructor
    }
    ckpt.params = ModelParams::init(cfg, vocab_size);
    for (Mat* m : ckpt.params.matrices()) read_doubles(in, m->a.data(), m->a.size());
    for (Vec* v : ckpt.params.vectors()) read_doubles(in, v->data(), v->size());
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return ckpt;
}

Vec pool(const Mat& h) {
    if (h.rows == 0) throw std::runtime_error("pool: empty matrix");
    Vec x(h.cols, 0.0);
    for (std::size_t r = 0; r < h.rows; ++r) {
        for (std::size_t c = 0; c < h.cols; ++c) x[c] += h(r, c);
    }
    double inv = 1.0 / static_cast<double>(h.rows);
    for (double& v : x) v *= inv;
    return x;
}

Encoding encode(const ModelParams& params, const TokenVocab& vocab,
                const std::string& question, const Paragraph& paragraph, int max_len) {
    if (max_len < 3) throw std::runtime_error("encode: max_len must be >= 3");
    std::vector<int> tokens{TokenVocab::kQMark};
    for (const std::string& t : tokenize_unigrams(question)) tokens.push_back(vocab.lookup(t));
    tokens.push_back(TokenVocab::kSep);
    std::string body = paragraph.title;
    for (const std::string& s : paragraph.sentences) {
        body += " ";
        body += s;
    }
    for (const std::string& t : tokenize_unigrams(body)) tokens.push_back(vocab.lookup(t));
    if (static_cast<int>(tokens.size()) > max_len) tokens.resize(max_len);

    int d = params.config.dim;
    Encoding enc;
    enc.tokens = tokens;
    enc.h = Mat(tokens.size(), d);
    for (std::size_t j = 0; j < tokens.size(); ++j) {
        Vec e(d);
        for (int c = 0; c < d; ++c) e[c] = params.embeddings(tokens[j], c);
        Vec pre = matvec(params.enc_affine, e);
        for (int c = 0; c < d; ++c) enc.h(j, c) = std::tanh(pre[c] + params.enc_bias[c]);
    }
    enc.x = pool(enc.h);
    return enc;
}

void encode_backward_into(const ModelParams& params, const Encoding& enc, const Vec& d_x,
                          ModelParams& grad) {
    int d = params.config.dim;
    if (static_cast<int>(d_x.size()) != d) throw std::runtime_error("encode_backward: bad d_x");
    double inv = 1.0 / static_cast<double>(enc.h.rows);
    for (std::size_t j = 0; j < enc.h.rows; ++j) {
        Vec d_pre(d);
        for (int c = 0; c < d; ++c) {
            double hv = enc.h(j, c);
            d_pre[c] = d_x[c] * inv * (1.0 - hv * hv);
        }
        int tok = enc.tokens[j];
        Vec e(d);
        for (int c = 0; c < d; ++c) e[c] = params.embeddings(tok, c);
        add_outer(grad.enc_affine, d_pre, e);
        axpy(grad.enc_bias, 1.0, d_pre);
        Vec d_e = matvec_t(params.enc_affine, d_pre);
        for (int c = 0; c < d; ++c) grad.embeddings(tok, c) += d_e[c];
    }
}

EncoderGrads encode_backward(const ModelParams& params, const Encoding& enc, const Vec& d_x) {
    ModelParams grad = ModelParams::zeros_like(params);
    encode_backward_into(params, enc, d_x, grad);
    return {std::move(grad.embeddings), std::move(grad.enc_affine), std::move(grad.enc_bias)};
}

}  // namespace gmf
