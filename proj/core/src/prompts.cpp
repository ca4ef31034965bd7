#include "miscon/prompts.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "miscon/errors.hpp"
#include "miscon/rng.hpp"

namespace miscon {

namespace {

bool is_slot_name(std::string_view name) {
    if (name.empty()) return false;
    if (name.front() < 'a' || name.front() > 'z') return false;
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
        if (!ok) return false;
    }
    return true;
}

}  // namespace

PromptTemplate PromptTemplate::from_text(std::string name, std::string text) {
    std::vector<Segment> segments;
    std::vector<std::string> slots;
    std::string literal;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t open = text.find('{', pos);
        if (open == std::string::npos) {
            literal.append(text, pos, text.size() - pos);
            break;
        }
        const std::size_t close = text.find('}', open + 1);
        const std::string_view inner = close == std::string::npos
                                           ? std::string_view{}
                                           : std::string_view(text).substr(open + 1, close - open - 1);
        if (close == std::string::npos || !is_slot_name(inner)) {
            literal.append(text, pos, open + 1 - pos);
            pos = open + 1;
            continue;
        }
        literal.append(text, pos, open - pos);
        if (!literal.empty()) {
            segments.push_back({std::move(literal), false});
            literal.clear();
        }
        segments.push_back({std::string(inner), true});
        slots.emplace_back(inner);
        pos = close + 1;
    }
    if (!literal.empty()) segments.push_back({std::move(literal), false});
    return PromptTemplate(std::move(name), std::move(text), std::move(segments), std::move(slots));
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open template file '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_text(path.stem().string(), buffer.str());
}

std::string PromptTemplate::content_hash() const { return to_hex(fnv1a64_bytes(text_)); }

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    const std::set<std::string> slot_names(slots_.begin(), slots_.end());
    for (const auto& [key, value] : values) {
        if (!slot_names.contains(key)) {
            throw InputError("template '" + name_ + "' has no slot '" + key + "'");
        }
    }
    std::string out;
    out.reserve(text_.size());
    for (const auto& segment : segments_) {
        if (!segment.is_slot) {
            out += segment.text;
            continue;
        }
        const auto it = values.find(segment.text);
        if (it == values.end()) {
            throw InputError("template '" + name_ + "' slot '" + segment.text +
                             "' has no value");
        }
        out += it->second;
    }
    return out;
}

const std::vector<TemplatePin>& pinned_templates() {
    // Content hashes of the blessed template files under templates/. An
    // intentional template edit means a new file with a bumped version
    // suffix and a new pin row (PromptTemplate::content_hash prints the
    // value to use); editing a pinned file in place is an error by design.
    static const std::vector<TemplatePin> pins = {
        {"rerank_verify_v1", "b710e43199050803"},
        {"reasoner_v1", "79823e367db9d106"},
        {"judge_v1", "176ee3c233c52d80"},
    };
    return pins;
}

void verify_pinned(const PromptTemplate& tmpl) {
    for (const auto& pin : pinned_templates()) {
        if (pin.name != tmpl.name()) continue;
        const std::string hash = tmpl.content_hash();
        if (hash != pin.hash) {
            throw InputError("template '" + tmpl.name() + "' content hash " + hash +
                             " does not match the pinned " + std::string(pin.hash) +
                             "; the file changed without a version bump");
        }
        return;
    }
    throw InputError("template '" + tmpl.name() + "' has no pinned version");
}

PromptTemplate load_pinned(const std::filesystem::path& path) {
    PromptTemplate tmpl = PromptTemplate::load(path);
    verify_pinned(tmpl);
    return tmpl;
}

namespace {

constexpr std::string_view kBlockStart = "<|im_start|>";
constexpr std::string_view kBlockEnd = "<|im_end|>";

bool whitespace_only(std::string_view s) {
    for (char c : s) {
        if (c != ' ' && c != '\t' && c != '\r' && c != '\n') return false;
    }
    return true;
}

std::string_view trim_blanks(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

}  // namespace

ChatMarkup parse_chat_markup(std::string_view text) {
    ChatMarkup markup;
    std::size_t pos = 0;
    while (true) {
        const std::size_t start = text.find(kBlockStart, pos);
        const std::string_view between =
            text.substr(pos, (start == std::string_view::npos ? text.size() : start) - pos);
        if (!whitespace_only(between)) {
            throw InputError("chat markup has text outside <|im_start|> blocks");
        }
        if (start == std::string_view::npos) break;

        const std::size_t header_begin = start + kBlockStart.size();
        const std::size_t header_end = text.find('\n', header_begin);
        const std::string_view role_line = header_end == std::string_view::npos
                                               ? text.substr(header_begin)
                                               : text.substr(header_begin, header_end - header_begin);
        const std::string role{trim_blanks(role_line)};
        if (role != "system" && role != "user" && role != "assistant") {
            throw InputError("chat markup has unknown role '" + role + "'");
        }

        const std::size_t body_begin =
            header_end == std::string_view::npos ? text.size() : header_end + 1;
        const std::size_t end = text.find(kBlockEnd, body_begin);
        if (end == std::string_view::npos) {
            if (!whitespace_only(text.substr(body_begin))) {
                throw InputError("chat markup block for role '" + role +
                                 "' is not terminated by <|im_end|>");
            }
            if (role != "assistant") {
                throw InputError("chat markup ends with a bare '" + role +
                                 "' header; only an assistant generation cue may be unterminated");
            }
            markup.ends_with_assistant_cue = true;
            return markup;
        }

        std::string_view content = text.substr(body_begin, end - body_begin);
        if (!content.empty() && content.back() == '\n') content.remove_suffix(1);
        markup.messages.push_back({role, std::string(content)});
        pos = end + kBlockEnd.size();
    }
    return markup;
}

}  // namespace miscon
