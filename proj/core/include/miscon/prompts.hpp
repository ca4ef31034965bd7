#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "miscon/backends.hpp"

namespace miscon {

/// A versioned prompt template with `{slot}` placeholders. A brace pair is a
/// placeholder only when it encloses a lowercase identifier ([a-z][a-z0-9_]*);
/// anything else, including JSON-looking braces, stays literal.
class PromptTemplate {
public:
    /// Loads the raw bytes of `path`; the template name is the file stem
    /// (e.g. "rerank_verify_v1"). Trailing newlines are content.
    static PromptTemplate load(const std::filesystem::path& path);

    static PromptTemplate from_text(std::string name, std::string text);

    const std::string& name() const noexcept { return name_; }
    const std::string& text() const noexcept { return text_; }

    /// Content hash of the raw template bytes (16 hex chars). This is what
    /// the pin registry locks.
    std::string content_hash() const;

    /// Slot names in order of appearance (repeats included).
    const std::vector<std::string>& slots() const noexcept { return slots_; }

    /// Substitutes every placeholder. Each template slot must have a value
    /// and each value must name a template slot; anything else throws
    /// InputError. Slot values are inserted verbatim, never re-scanned.
    std::string render(const std::map<std::string, std::string>& values) const;

private:
    struct Segment {
        std::string text;  // literal bytes, or the slot name
        bool is_slot = false;
    };

    PromptTemplate(std::string name, std::string text, std::vector<Segment> segments,
                   std::vector<std::string> slots)
        : name_(std::move(name)),
          text_(std::move(text)),
          segments_(std::move(segments)),
          slots_(std::move(slots)) {}

    std::string name_;
    std::string text_;
    std::vector<Segment> segments_;
    std::vector<std::string> slots_;
};

/// Compiled-in registry of blessed template versions. Rendering golden files
/// and fixture keys both depend on exact template bytes, so the engine
/// refuses to run with a template whose content drifted from its pin.
struct TemplatePin {
    std::string_view name;
    std::string_view hash;
};

const std::vector<TemplatePin>& pinned_templates();

/// Throws InputError when the template has no pin or its hash differs.
void verify_pinned(const PromptTemplate& tmpl);

/// load() followed by verify_pinned().
PromptTemplate load_pinned(const std::filesystem::path& path);

/// Parsed `<|im_start|>role ... <|im_end|>` markup. A final `<|im_start|>assistant`
/// header with no body is the generation cue and produces no message.
struct ChatMarkup {
    std::vector<ChatMessage> messages;
    bool ends_with_assistant_cue = false;
};

/// Splits chat markup into (role, content) messages. The role is the rest of
/// the header line with surrounding blanks trimmed (the shipped templates
/// spell both "<|im_start|> system" and "<|im_start|>user"). Content runs
/// from after the header line to the end marker, minus the single newline
/// that conventionally precedes `<|im_end|>`. Non-whitespace outside blocks,
/// unknown roles, and unterminated non-final blocks are InputErrors.
ChatMarkup parse_chat_markup(std::string_view text);

}  // namespace miscon
