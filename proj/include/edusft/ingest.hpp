#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "edusft/corpus.hpp"

namespace edusft::ingest {

struct ImageContext {
    std::string image_ref;
    std::string before_paragraph;  // empty at document start
    std::string after_paragraph;   // empty at document end
    std::optional<std::string> caption;
};

struct QsaTriplet {
    std::string question;
    std::string solution;
    char answer = 'A';
};

struct SlideDeckRef {
    std::string deck_id;
    std::size_t page_count = 0;
    std::vector<std::string> page_image_refs;
};

struct ArticleDoc {
    std::string doc_id;
    std::string title;
    std::string markdown_body;
    std::vector<ImageContext> images;
    std::vector<QsaTriplet> triplets;
    std::vector<SlideDeckRef> slide_refs;
    std::optional<Metadata> meta;       // from <meta name="curriculum:*"> tags
    std::vector<std::string> warnings;  // non-fatal issues (math passthrough, missing decks, skipped blocks)
};

// Placeholder tokens written into markdown_body.
std::string image_placeholder(std::string_view ref);
std::string slides_placeholder(std::string_view deck_id);

struct TripletRules {
    std::vector<std::string> question_labels{"Soru", "Question"};
    std::vector<std::string> solution_labels{"Çözüm", "Solution"};
    std::vector<std::string> answer_labels{"Cevap", "Yanıt", "Answer"};
};

struct SiteRules {
    // Tried in order before falling back to the density heuristic.
    std::vector<std::string> container_selectors{"article", "main", ".post-content", ".entry-content"};
    // Class or id tokens marking boilerplate blocks.
    std::vector<std::string> boilerplate_tokens{"nav",     "navbar",  "menu",   "footer", "sidebar",    "advert",
                                                "ads",     "ad",      "banner", "share",  "social",     "comment",
                                                "comments", "related", "cookie", "promo",  "breadcrumb", "newsletter"};
    // Substrings of iframe src values that mark an embedded slide viewer.
    std::vector<std::string> slide_patterns{"slides", "docs.google.com/presentation", "speakerdeck", "slideshare"};
    // Pre-rendered deck pages live in <site>/<deck_dir>/<deck_id>/.
    std::string deck_dir = "decks";
    TripletRules triplets;

    // Keys mirror the fields; "triplets" has question/solution/answer arrays.
    static SiteRules from_json(const json& j);
};

class EmptyBodyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MathResult {
    std::string latex;
    bool recognized = true;  // false: passthrough of unrecognized markup
};

// KaTeX/MathML fragment -> TeX source from its annotation node (or a
// math/tex script). Plain text without markup is returned unchanged.
MathResult normalize_math_markup(std::string_view fragment);

struct DocumentSource {
    std::string doc_id;
    std::filesystem::path rel_path;  // relative to the site root
    std::string content;
    bool markdown = false;
};

// Converts one page. site_root locates pre-rendered deck pages; pass an empty
// path to skip deck registration. Throws EmptyBodyError when no article
// container is found.
ArticleDoc extract_article(const DocumentSource& doc, const SiteRules& rules,
                           const std::filesystem::path& site_root = {});

struct TripletSkip {
    std::size_t block_index = 0;  // ordinal of the question block
    std::string reason;
};

struct TripletExtraction {
    std::vector<QsaTriplet> triplets;
    std::vector<TripletSkip> skipped;
};

// Scans markdown blocks for labeled question / solution / answer sections.
// Incomplete blocks are skipped and reported.
TripletExtraction extract_triplets_detailed(std::string_view markdown_body, const TripletRules& rules);
std::vector<QsaTriplet> extract_triplets(const ArticleDoc& article, const TripletRules& rules);

struct IngestFailure {
    std::string doc_id;
    std::string error;
};

struct IngestReport {
    std::size_t documents = 0;
    std::size_t markdowns = 0;
    std::size_t images = 0;
    std::size_t decks = 0;
    std::size_t pages = 0;
    std::size_t triplets = 0;
    // Augmentation bookkeeping, filled by later distillation campaigns.
    std::size_t synthetic_qa = 0;
    std::size_t captions = 0;
    std::size_t slide_descriptions = 0;
    std::vector<IngestFailure> failures;

    std::size_t synthetic_total() const { return synthetic_qa + captions + slide_descriptions; }
    IngestReport& operator+=(const IngestReport& other);
    json to_json() const;
};

struct IngestOutput {
    IngestReport report;
    std::vector<ArticleDoc> articles;  // manifest order, failures omitted
};

// Every .html/.htm/.md file under dir (recursively, sorted by path), except
// files under the deck directory.
std::vector<DocumentSource> load_site(const std::filesystem::path& dir, const SiteRules& rules);

// Per-document failures are recorded, never thrown.
IngestOutput ingest_site(const std::vector<DocumentSource>& manifest, const SiteRules& rules,
                         const std::filesystem::path& site_root, std::size_t parallelism = 1);

// File name -> JSONL content for articles.jsonl, image_contexts.jsonl,
// triplets.jsonl and decks.jsonl.
std::map<std::string, std::string> render_outputs(const IngestOutput& output);
void write_outputs(const IngestOutput& output, const std::filesystem::path& out_dir);

// Triplets as CV samples ("<doc_id>-t<n>"), inheriting the article metadata.
Corpus triplets_to_samples(const std::vector<ArticleDoc>& articles);

}  // namespace edusft::ingest
