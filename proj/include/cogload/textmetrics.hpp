#pragma once

// Disclosure complexity from filing text: Gunning Fog, log file size and the
// k-token shingle boilerplate ratio.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace cogload::text {

/// Lowercase words after which a period does not end a sentence.
std::unordered_set<std::string> default_abbreviations();
/// One abbreviation per line; blank lines and lines starting with '#' ignored.
std::unordered_set<std::string> read_abbreviations(std::istream& in);

struct Tokenized {
    std::vector<std::string> tokens;
    /// Token count at each sentence end (strictly increasing).
    std::vector<std::size_t> sentence_ends;
    /// Control bytes and invalid UTF-8 bytes that were skipped.
    std::size_t skipped_bytes = 0;
};

/// Words are maximal runs of ASCII letters and hyphens, edge hyphens trimmed,
/// lowercased. A sentence ends at '.', '!' or '?' followed by whitespace and
/// an uppercase letter (closing and opening quotes or brackets may sit in
/// between), or by the end of the text. A period directly after a listed
/// abbreviation or a single letter does not end a sentence. Words after the
/// last boundary form a final sentence.
Tokenized tokenize(std::string_view text);
Tokenized tokenize(std::string_view text, const std::unordered_set<std::string>& abbreviations);

/// Removes script, style and table blocks, comments and tags, and decodes
/// character entities. Typographic quotes and dashes become ASCII.
std::string strip_markup(std::string_view html);

/// Vowel groups (a, e, i, o, u, y), less a silent final 'e' unless the word
/// ends in consonant + "le"; at least 1. Hyphenated words sum their parts.
int syllable_count(std::string_view word);

struct DocumentStats {
    std::size_t word_count = 0;
    std::size_t sentence_count = 0;
    std::size_t complex_word_count = 0;  // >= 3 syllables
    std::size_t byte_size = 0;
};

DocumentStats document_stats(const Tokenized& tokens, std::size_t byte_size);

/// 0.4 * (words / sentences + 100 * complex / words).
double fog_index(const DocumentStats& stats);

/// ln(bytes / 1024).
double log_file_size(std::uint64_t byte_size);

using WindowHash = std::uint64_t (*)(std::span<const std::string> window);

/// FNV-1a over the window's tokens, separated by 0x1f.
std::uint64_t fnv1a_window(std::span<const std::string> window);
/// Multiplicative hash with a splitmix64 finish per token. Used to check that
/// ratios do not depend on the hash.
std::uint64_t mix_window(std::span<const std::string> window);

struct ShingleSet {
    std::string document_id;
    std::vector<std::uint64_t> shingles;  // sorted, unique
    bool contains(std::uint64_t h) const;
};

ShingleSet make_shingles(std::string document_id, std::span<const std::string> tokens,
                         std::size_t k = 8, WindowHash hash = fnv1a_window);

/// Share of doc's shingles present in at least one reference set.
double boilerplate_ratio(const ShingleSet& doc, std::span<const ShingleSet* const> reference);

enum class ReferenceScope { same_period, firm_history, all };
ReferenceScope parse_reference_scope(const std::string& name);
const char* to_string(ReferenceScope scope);

struct ManifestEntry {
    std::string document_id;
    std::string firm_id;
    long period = 0;
    std::string path;
};

/// CSV with header document_id,firm_id,period,path.
std::vector<ManifestEntry> read_manifest(std::istream& in);

struct TextOptions {
    std::size_t shingle_k = 8;
    bool strip_markup = true;
    ReferenceScope scope = ReferenceScope::same_period;
    std::unordered_set<std::string> abbreviations = default_abbreviations();
};

struct DocumentMetrics {
    std::string document_id;
    std::optional<double> fog;
    std::optional<double> log_size_kb;
    std::optional<double> boilerplate;
    std::size_t word_count = 0;
    std::size_t sentence_count = 0;
    std::vector<std::string> messages;  // failures and warnings
};

/// Reads every manifest document relative to `corpus_dir`. A document that
/// cannot be read or measured gets empty fields and an error message; the
/// rest of the corpus is unaffected.
std::vector<DocumentMetrics> corpus_metrics(std::span<const ManifestEntry> manifest,
                                            const std::string& corpus_dir,
                                            const TextOptions& options, int threads = 1);

/// Header document_id,fog_index,log_file_size_kb,boilerplate_ratio,word_count,sentence_count;
/// missing values are written as NA.
void write_metrics_csv(std::ostream& out, std::span<const DocumentMetrics> rows);

}  // namespace cogload::text
