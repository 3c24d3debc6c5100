#include "cogload/textmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "cogload/error.hpp"
#include "cogload/parallel.hpp"

namespace cogload::text {

namespace {

bool is_alpha(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_upper(unsigned char c) { return c >= 'A' && c <= 'Z'; }
bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_closer(unsigned char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }
bool is_opener(unsigned char c) { return c == '"' || c == '\'' || c == '(' || c == '['; }
bool is_vowel(char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

// Length of a valid UTF-8 sequence starting at s[i], or 0.
std::size_t utf8_length(std::string_view s, std::size_t i) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    if (c >= 0xC2 && c <= 0xDF) len = 2;
    else if (c >= 0xE0 && c <= 0xEF) len = 3;
    else if (c >= 0xF0 && c <= 0xF4) len = 4;
    else return 0;
    if (i + len > s.size()) return 0;
    for (std::size_t k = 1; k < len; ++k)
        if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 0;
    return len;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

bool ends_sentence(std::string_view text, std::size_t i) {
    std::size_t j = i + 1;
    while (j < text.size() && (is_closer(static_cast<unsigned char>(text[j])) ||
                               text[j] == '.' || text[j] == '!' || text[j] == '?'))
        ++j;
    const std::size_t after_closers = j;
    while (j < text.size() && is_space(static_cast<unsigned char>(text[j]))) ++j;
    if (j == text.size()) return true;
    if (j == after_closers) return false;  // no whitespace
    while (j < text.size() && is_opener(static_cast<unsigned char>(text[j]))) ++j;
    return j < text.size() && is_upper(static_cast<unsigned char>(text[j]));
}

std::string decode_entity(std::string_view name) {
    static const std::map<std::string, std::string, std::less<>> named{
        {"amp", "&"},    {"lt", "<"},     {"gt", ">"},     {"quot", "\""},  {"apos", "'"},
        {"nbsp", " "},   {"lsquo", "'"},  {"rsquo", "'"},  {"ldquo", "\""}, {"rdquo", "\""},
        {"ndash", " - "}, {"mdash", " - "}, {"hellip", "..."}, {"sect", " "}, {"reg", " "},
        {"copy", " "},   {"trade", " "},  {"bull", " "},   {"middot", " "}};
    if (!name.empty() && name[0] == '#') {
        long code = 0;
        try {
            code = name.size() > 1 && (name[1] == 'x' || name[1] == 'X')
                       ? std::stol(std::string(name.substr(2)), nullptr, 16)
                       : std::stol(std::string(name.substr(1)), nullptr, 10);
        } catch (const std::exception&) {
            return " ";
        }
        if (code == 8216 || code == 8217 || code == 8242) return "'";
        if (code == 8220 || code == 8221 || code == 8243) return "\"";
        if (code == 8211 || code == 8212) return " - ";
        if (code == 8230) return "...";
        if (code >= 32 && code < 127) return std::string(1, static_cast<char>(code));
        if (code == 9 || code == 10 || code == 13) return std::string(1, static_cast<char>(code));
        return " ";
    }
    const auto it = named.find(lower(name));
    return it == named.end() ? " " : it->second;
}

// Inline elements vanish without a gap; any other tag acts as whitespace.
bool is_inline_tag(std::string_view tag) {
    std::size_t i = 0;
    if (i < tag.size() && tag[i] == '/') ++i;
    std::size_t j = i;
    while (j < tag.size() && is_alpha(static_cast<unsigned char>(tag[j]))) ++j;
    const std::string name = lower(tag.substr(i, j - i));
    static const char* const kInline[] = {"a", "b", "i", "u", "em", "strong", "font", "span",
                                          "sup", "sub", "small", "big", "ins", "del", "abbr"};
    return std::find(std::begin(kInline), std::end(kInline), name) != std::end(kInline);
}

std::string remove_blocks(std::string_view html, std::string_view tag) {
    std::string out;
    const std::string lowered = lower(html);
    const std::string open = fmt::format("<{}", tag);
    const std::string close = fmt::format("</{}", tag);
    std::size_t pos = 0;
    while (pos < html.size()) {
        std::size_t start = lowered.find(open, pos);
        while (start != std::string::npos && start + open.size() < lowered.size() &&
               is_alpha(static_cast<unsigned char>(lowered[start + open.size()])))
            start = lowered.find(open, start + 1);
        if (start == std::string::npos) break;
        out.append(html.substr(pos, start - pos));
        out.push_back(' ');
        const std::size_t end = lowered.find(close, start);
        if (end == std::string::npos) return out;
        const std::size_t gt = lowered.find('>', end);
        pos = gt == std::string::npos ? html.size() : gt + 1;
    }
    if (pos < html.size()) out.append(html.substr(pos));
    return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    for (std::string& f : fields) {
        while (!f.empty() && is_space(static_cast<unsigned char>(f.back()))) f.pop_back();
        std::size_t k = 0;
        while (k < f.size() && is_space(static_cast<unsigned char>(f[k]))) ++k;
        f.erase(0, k);
    }
    return fields;
}

std::string format_optional(const std::optional<double>& v) {
    return v ? fmt::format("{}", *v) : std::string("NA");
}

}  // namespace

std::unordered_set<std::string> default_abbreviations() {
    return {"dr",  "mr",  "mrs",  "ms",  "prof", "inc", "co",  "corp", "ltd", "llc", "jr",
            "sr",  "st",  "vs",   "etc", "no",   "nos", "fig", "approx", "dept",
            "est", "jan", "feb",  "mar", "apr",  "jun", "jul", "aug",  "sep", "sept", "oct",
            "nov", "dec", "avg",  "cf",  "al", "vol", "pp"};
}

std::unordered_set<std::string> read_abbreviations(std::istream& in) {
    std::unordered_set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (is_space(static_cast<unsigned char>(line.back())) || line.back() == '.'))
            line.pop_back();
        std::size_t k = 0;
        while (k < line.size() && is_space(static_cast<unsigned char>(line[k]))) ++k;
        line.erase(0, k);
        if (line.empty() || line[0] == '#') continue;
        out.insert(lower(line));
    }
    return out;
}

Tokenized tokenize(std::string_view text) {
    static const std::unordered_set<std::string> abbreviations = default_abbreviations();
    return tokenize(text, abbreviations);
}

Tokenized tokenize(std::string_view text, const std::unordered_set<std::string>& abbreviations) {
    Tokenized out;
    std::size_t i = 0;
    // Word ending just before the current position, for abbreviation checks.
    std::string last_word;
    std::size_t last_word_end = std::string_view::npos;
    auto close_sentence = [&] {
        if (!out.tokens.empty() &&
            (out.sentence_ends.empty() || out.sentence_ends.back() < out.tokens.size()))
            out.sentence_ends.push_back(out.tokens.size());
    };
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_alpha(c) || c == '-') {
            std::size_t j = i;
            while (j < text.size() && (is_alpha(static_cast<unsigned char>(text[j])) || text[j] == '-')) ++j;
            std::size_t a = i, b = j;
            while (a < b && text[a] == '-') ++a;
            while (b > a && text[b - 1] == '-') --b;
            if (a < b) {
                out.tokens.push_back(lower(text.substr(a, b - a)));
                last_word = out.tokens.back();
                last_word_end = b;
            }
            i = j;
            continue;
        }
        if (c == '.' || c == '!' || c == '?') {
            const bool abbreviated = c == '.' && last_word_end == i &&
                                     (last_word.size() == 1 || abbreviations.count(last_word) > 0);
            if (!abbreviated && ends_sentence(text, i)) close_sentence();
            ++i;
            continue;
        }
        if (c >= 0x80) {
            const std::size_t len = utf8_length(text, i);
            if (len == 0) {
                ++out.skipped_bytes;
                ++i;
            } else {
                i += len;
            }
            continue;
        }
        if ((c < 0x20 && !is_space(c)) || c == 0x7f) ++out.skipped_bytes;
        ++i;
    }
    close_sentence();
    return out;
}

std::string strip_markup(std::string_view html) {
    std::string s(html);
    for (const char* tag : {"script", "style", "table"}) s = remove_blocks(s, tag);

    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s.compare(i, 4, "<!--") == 0) {
            const std::size_t end = s.find("-->", i + 4);
            i = end == std::string::npos ? s.size() : end + 3;
            out.push_back(' ');
            continue;
        }
        if (s[i] == '<') {
            const std::size_t end = s.find('>', i);
            if (end == std::string::npos) break;
            if (!is_inline_tag(std::string_view(s).substr(i + 1, end - i - 1))) out.push_back(' ');
            i = end + 1;
            continue;
        }
        if (s[i] == '&') {
            const std::size_t end = s.find(';', i);
            if (end != std::string::npos && end - i <= 10) {
                out += decode_entity(std::string_view(s).substr(i + 1, end - i - 1));
                i = end + 1;
                continue;
            }
        }
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

int syllable_count(std::string_view word) {
    int total = 0;
    std::size_t start = 0;
    while (start <= word.size()) {
        std::size_t end = word.find('-', start);
        if (end == std::string_view::npos) end = word.size();
        const std::string part = lower(word.substr(start, end - start));
        if (!part.empty()) {
            int groups = 0;
            bool in_group = false;
            for (char c : part) {
                const bool v = is_vowel(c);
                if (v && !in_group) ++groups;
                in_group = v;
            }
            const std::size_t n = part.size();
            const bool silent_e = n >= 2 && part[n - 1] == 'e' && !is_vowel(part[n - 2]);
            const bool consonant_le = n >= 3 && part[n - 2] == 'l' && !is_vowel(part[n - 3]);
            if (silent_e && !consonant_le && groups > 1) --groups;
            total += std::max(1, groups);
        }
        start = end + 1;
    }
    return std::max(1, total);
}

DocumentStats document_stats(const Tokenized& tokens, std::size_t byte_size) {
    DocumentStats s;
    s.word_count = tokens.tokens.size();
    s.sentence_count = tokens.sentence_ends.size();
    s.byte_size = byte_size;
    for (const std::string& w : tokens.tokens)
        if (syllable_count(w) >= 3) ++s.complex_word_count;
    return s;
}

double fog_index(const DocumentStats& stats) {
    if (stats.word_count < 1 || stats.sentence_count < 1)
        throw DegenerateDocument(fmt::format("fog index needs at least one word and sentence ({} words, {} sentences)",
                                             stats.word_count, stats.sentence_count));
    const double words = static_cast<double>(stats.word_count);
    // 2/5 rather than 0.4: one rounding, so 6 words in 1 sentence give exactly 2.4.
    return (words / static_cast<double>(stats.sentence_count) +
            100.0 * static_cast<double>(stats.complex_word_count) / words) * 2.0 / 5.0;
}

double log_file_size(std::uint64_t byte_size) {
    if (byte_size == 0) throw DegenerateDocument("log file size of an empty file");
    return std::log(static_cast<double>(byte_size) / 1024.0);
}

std::uint64_t fnv1a_window(std::span<const std::string> window) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](unsigned char b) {
        h ^= b;
        h *= 0x100000001b3ULL;
    };
    for (std::size_t t = 0; t < window.size(); ++t) {
        if (t) feed(0x1f);
        for (char c : window[t]) feed(static_cast<unsigned char>(c));
    }
    return h;
}

std::uint64_t mix_window(std::span<const std::string> window) {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (const std::string& token : window) {
        std::uint64_t t = token.size();
        for (char c : token) t = t * 131 + static_cast<unsigned char>(c);
        h = splitmix64(h ^ splitmix64(t));
    }
    return h;
}

bool ShingleSet::contains(std::uint64_t h) const {
    return std::binary_search(shingles.begin(), shingles.end(), h);
}

ShingleSet make_shingles(std::string document_id, std::span<const std::string> tokens, std::size_t k,
                         WindowHash hash) {
    if (k < 1) throw InvalidArgument("shingle size k must be at least 1");
    ShingleSet set;
    set.document_id = std::move(document_id);
    if (tokens.size() >= k) {
        set.shingles.reserve(tokens.size() - k + 1);
        for (std::size_t i = 0; i + k <= tokens.size(); ++i) set.shingles.push_back(hash(tokens.subspan(i, k)));
    }
    std::sort(set.shingles.begin(), set.shingles.end());
    set.shingles.erase(std::unique(set.shingles.begin(), set.shingles.end()), set.shingles.end());
    return set;
}

double boilerplate_ratio(const ShingleSet& doc, std::span<const ShingleSet* const> reference) {
    if (doc.shingles.empty())
        throw DegenerateDocument(fmt::format("document '{}' has no shingles", doc.document_id));
    std::size_t shared = 0;
    for (std::uint64_t h : doc.shingles)
        if (std::any_of(reference.begin(), reference.end(), [h](const ShingleSet* r) { return r->contains(h); }))
            ++shared;
    return static_cast<double>(shared) / static_cast<double>(doc.shingles.size());
}

ReferenceScope parse_reference_scope(const std::string& name) {
    if (name == "same_period") return ReferenceScope::same_period;
    if (name == "firm_history") return ReferenceScope::firm_history;
    if (name == "all") return ReferenceScope::all;
    throw InvalidArgument(fmt::format("unknown reference scope '{}' (same_period, firm_history, all)", name));
}

const char* to_string(ReferenceScope scope) {
    switch (scope) {
    case ReferenceScope::same_period: return "same_period";
    case ReferenceScope::firm_history: return "firm_history";
    case ReferenceScope::all: return "all";
    }
    return "same_period";
}

std::vector<ManifestEntry> read_manifest(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("manifest is empty: expected a header line");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split_csv(line);
    const std::vector<std::string> expected{"document_id", "firm_id", "period", "path"};
    std::vector<std::size_t> pos;
    for (const std::string& name : expected) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError(fmt::format("manifest is missing column '{}'", name));
        pos.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    std::vector<ManifestEntry> out;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv(line);
        if (f.size() != header.size())
            throw DataError(fmt::format("manifest line {}: expected {} fields, found {}", line_no, header.size(), f.size()));
        ManifestEntry e;
        e.document_id = f[pos[0]];
        e.firm_id = f[pos[1]];
        try {
            std::size_t used = 0;
            e.period = std::stol(f[pos[2]], &used);
            if (used != f[pos[2]].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw DataError(fmt::format("manifest line {}: period '{}' is not an integer", line_no, f[pos[2]]));
        }
        e.path = f[pos[3]];
        if (!seen.insert(e.document_id).second)
            throw DataError(fmt::format("manifest line {}: duplicate document_id '{}'", line_no, e.document_id));
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<DocumentMetrics> corpus_metrics(std::span<const ManifestEntry> manifest,
                                            const std::string& corpus_dir,
                                            const TextOptions& options, int threads) {
    if (options.shingle_k < 1) throw InvalidArgument("shingle size k must be at least 1");
    const std::size_t n = manifest.size();
    std::vector<DocumentMetrics> rows(n);
    std::vector<ShingleSet> shingles(n);

    parallel_for(n, threads, [&](std::size_t d) {
        const ManifestEntry& e = manifest[d];
        DocumentMetrics& row = rows[d];
        row.document_id = e.document_id;
        shingles[d].document_id = e.document_id;
        const std::filesystem::path path = std::filesystem::path(corpus_dir) / e.path;
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            row.messages.push_back(fmt::format("cannot read '{}'", path.string()));
            return;
        }
        const std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        try {
            row.log_size_kb = log_file_size(raw.size());
        } catch (const DegenerateDocument& err) {
            row.messages.push_back(err.what());
        }
        const std::string body = options.strip_markup ? strip_markup(raw) : raw;
        const Tokenized tok = tokenize(body, options.abbreviations);
        const DocumentStats stats = document_stats(tok, raw.size());
        row.word_count = stats.word_count;
        row.sentence_count = stats.sentence_count;
        try {
            row.fog = fog_index(stats);
        } catch (const DegenerateDocument& err) {
            row.messages.push_back(err.what());
        }
        if (tok.skipped_bytes > 0)
            row.messages.push_back(fmt::format("skipped {} non-text bytes", tok.skipped_bytes));
        shingles[d] = make_shingles(e.document_id, tok.tokens, options.shingle_k);
    });

    parallel_for(n, threads, [&](std::size_t d) {
        if (shingles[d].shingles.empty()) {
            rows[d].messages.push_back(fmt::format("document '{}' has no shingles", manifest[d].document_id));
            return;
        }
        std::vector<const ShingleSet*> reference;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == d) continue;
            const bool in_scope =
                options.scope == ReferenceScope::all ||
                (options.scope == ReferenceScope::same_period && manifest[r].period == manifest[d].period) ||
                (options.scope == ReferenceScope::firm_history && manifest[r].firm_id == manifest[d].firm_id &&
                 manifest[r].period < manifest[d].period);
            if (in_scope) reference.push_back(&shingles[r]);
        }
        rows[d].boilerplate = boilerplate_ratio(shingles[d], reference);
    });
    return rows;
}

void write_metrics_csv(std::ostream& out, std::span<const DocumentMetrics> rows) {
    out << "document_id,fog_index,log_file_size_kb,boilerplate_ratio,word_count,sentence_count\n";
    for (const DocumentMetrics& r : rows)
        out << fmt::format("{},{},{},{},{},{}\n", r.document_id, format_optional(r.fog),
                           format_optional(r.log_size_kb), format_optional(r.boilerplate), r.word_count,
                           r.sentence_count);
}

}  // namespace cogload::text
