#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "miscon/errors.hpp"
#include "miscon/prompts.hpp"
#include "miscon/rng.hpp"
#include "support.hpp"

using namespace miscon;
namespace mt = miscon::test;

TEST_CASE("slot scanning accepts lowercase identifiers only") {
    const auto tmpl = PromptTemplate::from_text(
        "t", "A {q_text} B {not-a-slot} C {Upper} D {x9_y} E {} F { pad } G {q_text}");
    const std::vector<std::string> expected = {"q_text", "x9_y", "q_text"};
    CHECK(tmpl.slots() == expected);

    const std::string out = tmpl.render({{"q_text", "Q"}, {"x9_y", "V"}});
    CHECK(out == "A Q B {not-a-slot} C {Upper} D V E {} F { pad } G Q");
}

TEST_CASE("json-looking braces stay literal") {
    const auto tmpl =
        PromptTemplate::from_text("t", "Reply as {\"score\": 1} about {candidate}.");
    CHECK(tmpl.slots() == std::vector<std::string>{"candidate"});
    CHECK(tmpl.render({{"candidate", "X"}}) == "Reply as {\"score\": 1} about X.");
}

TEST_CASE("unclosed and doubled braces") {
    const auto unclosed = PromptTemplate::from_text("t", "tail {q_text");
    CHECK(unclosed.slots().empty());
    CHECK(unclosed.render({}) == "tail {q_text");

    // The outer brace pair does not scan as a slot, but the inner one does.
    const auto doubled = PromptTemplate::from_text("t", "{{q_text}}");
    CHECK(doubled.slots() == std::vector<std::string>{"q_text"});
    CHECK(doubled.render({{"q_text", "V"}}) == "{V}");
}

TEST_CASE("render validates the value set in both directions") {
    const auto tmpl = PromptTemplate::from_text("two_slots", "{a} and {b}");
    CHECK_THROWS_WITH_AS(tmpl.render({{"a", "1"}}),
                         doctest::Contains("slot 'b' has no value"), InputError);
    CHECK_THROWS_WITH_AS(tmpl.render({{"a", "1"}, {"b", "2"}, {"c", "3"}}),
                         doctest::Contains("has no slot 'c'"), InputError);
    CHECK(tmpl.render({{"a", "1"}, {"b", "2"}}) == "1 and 2");
}

TEST_CASE("slot values are inserted verbatim, never re-scanned") {
    const auto tmpl = PromptTemplate::from_text("t", "{a}|{b}");
    const std::string out = tmpl.render({{"a", "{b}"}, {"b", "plain"}});
    CHECK(out == "{b}|plain");
}

TEST_CASE("content hash is the hash of the raw template bytes") {
    CHECK(PromptTemplate::from_text("t", "").content_hash() == "cbf29ce484222325");
    const std::string text = "Question: {q_text}\n";
    CHECK(PromptTemplate::from_text("t", text).content_hash() == to_hex(fnv1a64_bytes(text)));
    // Trailing newlines are content, so they move the hash.
    CHECK(PromptTemplate::from_text("t", "x").content_hash() !=
          PromptTemplate::from_text("t", "x\n").content_hash());
}

TEST_CASE("load takes the name from the file stem and keeps bytes intact") {
    mt::TempDir dir;
    const auto path = dir.path() / "my_prompt_v3.txt";
    mt::write_file(path, "Hello {name}\n");
    const auto tmpl = PromptTemplate::load(path);
    CHECK(tmpl.name() == "my_prompt_v3");
    CHECK(tmpl.text() == "Hello {name}\n");
    CHECK(tmpl.slots() == std::vector<std::string>{"name"});

    CHECK_THROWS_WITH_AS(PromptTemplate::load(dir.path() / "absent.txt"),
                         doctest::Contains("absent.txt"), InputError);
}

TEST_CASE("shipped templates match their pinned hashes") {
    const std::map<std::string, std::string> expected = {
        {"rerank_verify_v1", "b710e43199050803"},
        {"reasoner_v1", "79823e367db9d106"},
        {"judge_v1", "176ee3c233c52d80"},
    };
    CHECK(pinned_templates().size() == expected.size());
    for (const auto& [name, hash] : expected) {
        const auto tmpl = PromptTemplate::load(mt::templates_dir() / (name + ".txt"));
        CHECK(tmpl.content_hash() == hash);
        CHECK_NOTHROW(verify_pinned(tmpl));
    }
}

TEST_CASE("shipped templates expose the expected slots in order") {
    const auto verify = load_pinned(mt::templates_dir() / "rerank_verify_v1.txt");
    CHECK(verify.slots() == std::vector<std::string>{"q_text", "mc_answer", "explanation",
                                                     "correctness", "reasoning_type",
                                                     "misconception", "thought"});
    const auto reasoner = load_pinned(mt::templates_dir() / "reasoner_v1.txt");
    CHECK(reasoner.slots() == std::vector<std::string>{"q_text", "mc_answer", "explanation"});
    const auto judge = load_pinned(mt::templates_dir() / "judge_v1.txt");
    CHECK(judge.slots() == std::vector<std::string>{"q_text", "mc_answer", "explanation",
                                                    "label", "candidate"});
}

TEST_CASE("verify_pinned rejects drift and unknown names") {
    CHECK_THROWS_WITH_AS(verify_pinned(PromptTemplate::from_text("rerank_verify_v1", "tampered")),
                         doctest::Contains("does not match the pinned"), InputError);
    CHECK_THROWS_WITH_AS(verify_pinned(PromptTemplate::from_text("never_pinned_v0", "x")),
                         doctest::Contains("no pinned version"), InputError);

    mt::TempDir dir;
    const auto path = dir.path() / "rerank_verify_v1.txt";
    mt::write_file(path, "content that drifted\n");
    CHECK_THROWS_WITH_AS(load_pinned(path), doctest::Contains("does not match the pinned"),
                         InputError);
}

TEST_CASE("chat markup parsing splits roles and strips the block-final newline") {
    const auto markup = parse_chat_markup(
        "<|im_start|> system\nBe terse.\n<|im_end|>\n"
        "<|im_start|>user\nline one\nline two\n<|im_end|>\n"
        "<|im_start|>assistant\n");
    REQUIRE(markup.messages.size() == 2);
    CHECK(markup.messages[0].role == "system");
    CHECK(markup.messages[0].content == "Be terse.");
    CHECK(markup.messages[1].role == "user");
    CHECK(markup.messages[1].content == "line one\nline two");
    CHECK(markup.ends_with_assistant_cue);
}

TEST_CASE("chat markup newline semantics at the block edge") {
    // Only the single conventional newline before <|im_end|> is removed.
    CHECK(parse_chat_markup("<|im_start|>user\nX\n\n<|im_end|>").messages[0].content == "X\n");
    CHECK(parse_chat_markup("<|im_start|>user\nX<|im_end|>").messages[0].content == "X");
    CHECK(parse_chat_markup("<|im_start|>user\n<|im_end|>").messages[0].content.empty());
}

TEST_CASE("chat markup without a trailing cue reports no cue") {
    const auto markup = parse_chat_markup("<|im_start|>assistant\ndone\n<|im_end|>\n");
    REQUIRE(markup.messages.size() == 1);
    CHECK(markup.messages[0].role == "assistant");
    CHECK(markup.messages[0].content == "done");
    CHECK_FALSE(markup.ends_with_assistant_cue);
}

TEST_CASE("chat markup rejects malformed structure") {
    CHECK_THROWS_WITH_AS(parse_chat_markup("stray text\n<|im_start|>user\nX\n<|im_end|>"),
                         doctest::Contains("outside <|im_start|> blocks"), InputError);
    CHECK_THROWS_WITH_AS(parse_chat_markup("<|im_start|>user\nX\n<|im_end|> trailing junk"),
                         doctest::Contains("outside <|im_start|> blocks"), InputError);
    CHECK_THROWS_WITH_AS(parse_chat_markup("<|im_start|>oracle\nX\n<|im_end|>"),
                         doctest::Contains("unknown role 'oracle'"), InputError);
    CHECK_THROWS_WITH_AS(parse_chat_markup("<|im_start|>user\nX\n"),
                         doctest::Contains("not terminated"), InputError);
    CHECK_THROWS_WITH_AS(parse_chat_markup("<|im_start|>user\n"),
                         doctest::Contains("only an assistant generation cue"), InputError);
}

TEST_CASE("shipped templates parse as system+user with a generation cue") {
    for (const char* name : {"rerank_verify_v1", "reasoner_v1", "judge_v1"}) {
        const auto tmpl =
            load_pinned(mt::templates_dir() / (std::string(name) + ".txt"));
        std::map<std::string, std::string> values;
        for (const auto& slot : tmpl.slots()) values[slot] = "<" + slot + ">";
        const auto markup = parse_chat_markup(tmpl.render(values));
        REQUIRE(markup.messages.size() == 2);
        CHECK(markup.messages[0].role == "system");
        CHECK(markup.messages[1].role == "user");
        CHECK(markup.ends_with_assistant_cue);
        CHECK(markup.messages[1].content.find("<q_text>") != std::string::npos);
    }
}
