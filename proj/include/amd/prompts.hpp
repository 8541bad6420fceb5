#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "amd/errors.hpp"
#include "amd/util.hpp"

namespace amd {

struct AgentPrompt {
    std::string system;
    std::string user;  // {{placeholder}} template
};

// Substitutes {{name}} placeholders; unknown placeholders are an error so
// template/fill drift is caught immediately.
inline std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tpl.size());
    size_t i = 0;
    while (i < tpl.size()) {
        size_t open = tpl.find("{{", i);
        if (open == std::string_view::npos) {
            out.append(tpl.substr(i));
            break;
        }
        out.append(tpl.substr(i, open - i));
        size_t close = tpl.find("}}", open);
        if (close == std::string_view::npos) throw Error("unterminated {{placeholder}} in template");
        std::string name(tpl.substr(open + 2, close - open - 2));
        auto it = vars.find(name);
        if (it == vars.end()) throw Error("unknown template placeholder '" + name + "'");
        out.append(it->second);
        i = close + 2;
    }
    return out;
}

// The three agent prompts, versioned. The version participates in the
// expansion config hash, so editing templates invalidates cached expansions.
struct PromptTemplates {
    std::string version = "v1";
    AgentPrompt question;
    AgentPrompt answer;
    AgentPrompt feedback;

    static const PromptTemplates& builtin() {
        static const PromptTemplates t = make_builtin();
        return t;
    }

    // Overrides from a directory holding version.txt and
    // {question,answer,feedback}.{system,user}.txt.
    static PromptTemplates load_dir(const std::filesystem::path& dir) {
        PromptTemplates t;
        t.version = std::string(trim(read_file(dir / "version.txt")));
        if (t.version.empty()) throw Error("empty template version in " + dir.string());
        t.question = {read_file(dir / "question.system.txt"), read_file(dir / "question.user.txt")};
        t.answer = {read_file(dir / "answer.system.txt"), read_file(dir / "answer.user.txt")};
        t.feedback = {read_file(dir / "feedback.system.txt"), read_file(dir / "feedback.user.txt")};
        return t;
    }

private:
    static PromptTemplates make_builtin() {
        PromptTemplates t;
        t.version = "v1";
        t.question.system =
            "You are a Socratic questioning assistant for search query expansion. Given a search "
            "query, you write exactly three sub-questions, one per questioning dimension:\n"
            "- clarification: crafts a sub-question to refine intent and ensure accurate "
            "interpretation of the user query.\n"
            "- assumption_probing: decomposes the query by surfacing implicit assumptions, adding "
            "diversity and depth to retrieval.\n"
            "- implication_probing: explores downstream effects to expand the query with relevant "
            "and diverse information.\n"
            "Reply with one fenced JSON object with exactly the string keys \"clarification\", "
            "\"assumption_probing\" and \"implication_probing\".";
        t.question.user =
            "Initial query: {{query}}\n\n"
            "Write the three sub-questions for this query. Reply with only the fenced JSON object.";
        t.answer.system =
            "You answer sub-questions derived from a search query. Write a short, factual, "
            "information-dense passage for each sub-question, as if quoting from a relevant "
            "document. Reply with one fenced JSON object with exactly the string keys "
            "\"clarification\", \"assumption_probing\" and \"implication_probing\", each holding "
            "the answer to the corresponding sub-question.";
        t.answer.user =
            "Sub-questions:\n"
            "- clarification: {{clarification_question}}\n"
            "- assumption_probing: {{assumption_question}}\n"
            "- implication_probing: {{implication_question}}\n\n"
            "Answer all three sub-questions. Reply with only the fenced JSON object.";
        t.feedback.system =
            "You review machine-generated pseudo-answers used for search query expansion. Evaluate "
            "each answer against the initial query; rewrite any answer that is vague, redundant, or "
            "irrelevant; never drop a slot. Keep answers that are already informative and "
            "intent-aligned exactly as they are. Reply with one fenced JSON object with exactly the "
            "string keys \"clarification\", \"assumption_probing\" and \"implication_probing\", "
            "each holding the final text for its slot.";
        t.feedback.user =
            "Initial query: {{query}}\n\n"
            "Question-answer pairs:\n"
            "1. clarification question: {{clarification_question}}\n"
            "   answer: {{clarification_answer}}\n"
            "2. assumption_probing question: {{assumption_question}}\n"
            "   answer: {{assumption_answer}}\n"
            "3. implication_probing question: {{implication_question}}\n"
            "   answer: {{implication_answer}}\n\n"
            "Return the refined answers. Reply with only the fenced JSON object.";
        return t;
    }
};

}  // namespace amd
