#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "edusft/corpus.hpp"

namespace edusft::syntax {

// Canonical order is the enumerator order.
enum class Component { Question = 0, Meta, Think, Solution, Answer };

inline constexpr std::array<Component, 5> kAllComponents = {Component::Question, Component::Meta, Component::Think,
                                                            Component::Solution, Component::Answer};

char letter(Component c);
std::string_view tag_name(Component c);
std::optional<Component> component_from_tag(std::string_view tag);

class SyntaxError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Ordered subset of {Q, M, T, S, A} that always includes S and A.
class SyntaxConfig {
public:
    // Parses "QMSA"-style names. Letters must be distinct and in canonical
    // order; S and A are mandatory.
    static SyntaxConfig parse(std::string_view name);

    bool contains(Component c) const { return mask_ & bit(c); }
    std::vector<Component> components() const;
    std::string name() const;

    bool operator==(const SyntaxConfig&) const = default;

private:
    explicit SyntaxConfig(unsigned mask) : mask_(mask) {}
    static unsigned bit(Component c) { return 1u << static_cast<unsigned>(c); }
    unsigned mask_;
};

// The seven configurations compared in the syntax ablation, best first.
struct SyntaxExperiment {
    SyntaxConfig config;
    double reference_accuracy;  // fraction, display only
};
std::vector<SyntaxExperiment> enumerate_experiment_configs();

using ComponentMap = std::map<Component, std::string>;

// Labeled-line body for the <meta> block: subject, unit, objective.
std::string serialize_meta(const Metadata& meta);

class ComposeError : public std::runtime_error {
public:
    ComposeError(std::string sample_id, std::optional<Component> component, const std::string& message);
    const std::string& sample_id() const { return sample_id_; }
    std::optional<Component> component() const { return component_; }

private:
    std::string sample_id_;
    std::optional<Component> component_;
};

// Per-component bodies that compose() would emit. Throws ComposeError when a
// required field is missing, the answer is not a single A-E letter, or a body
// contains a reserved tag.
ComponentMap project(const Sample& sample, const SyntaxConfig& config);

struct RenderedText {
    std::string text;
    SyntaxConfig config;
    std::string sample_id;
};

// Concatenates <tag>body</tag> blocks in canonical order, one newline apart.
RenderedText compose(const Sample& sample, const SyntaxConfig& config);

enum class ParseErrorKind { DuplicateTag, UnknownTag, OutOfOrder, Unclosed, StrayText };
std::string_view to_string(ParseErrorKind kind);

class ParseError : public std::runtime_error {
public:
    ParseError(ParseErrorKind kind, std::size_t offset, const std::string& message);
    ParseErrorKind kind() const { return kind_; }
    std::size_t offset() const { return offset_; }

private:
    ParseErrorKind kind_;
    std::size_t offset_;
};

// Inverse of compose. Whitespace between blocks is ignored; bodies are returned
// verbatim.
ComponentMap parse(std::string_view text);

// Compatibility reader for close-less input: a block ends at its closing tag if
// present, otherwise at the next known opening tag or end of text. Bodies are
// trimmed when the closing tag is absent.
ComponentMap parse_lenient(std::string_view text);

// --- dataset rendering ------------------------------------------------------

struct RenderedRecord {
    std::string sample_id;
    std::string text;
    std::size_t prompt_end_offset = 0;  // byte offset where the completion region starts
    std::string config;
    std::vector<std::string> image_refs;
};

json record_to_json(const RenderedRecord& record);
// Throws std::invalid_argument naming the missing or mistyped field.
RenderedRecord record_from_json(const json& j);

struct RenderSkip {
    std::string sample_id;
    std::string reason;
};

struct RenderResult {
    std::vector<RenderedRecord> records;
    std::vector<RenderSkip> skips;
};

// The prompt region is the question block (plus images); everything after is
// completion. Samples that cannot satisfy the config are skipped with a reason.
RenderResult render_dataset(const Corpus& corpus, const SyntaxConfig& config);

}  // namespace edusft::syntax
