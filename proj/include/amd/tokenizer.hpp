#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "amd/util.hpp"

namespace amd {

// Classic Porter (1980) suffix-stripping stemmer. Operates on lowercase
// ASCII words; anything else is passed through untouched by the tokenizer.
class PorterStemmer {
public:
    static std::string stem(std::string word) {
        if (word.size() <= 2) return word;
        PorterStemmer s(std::move(word));
        s.step1ab();
        s.step1c();
        s.step2();
        s.step3();
        s.step4();
        s.step5();
        s.b_.resize(s.k_ + 1);
        return std::move(s.b_);
    }

private:
    explicit PorterStemmer(std::string word) : b_(std::move(word)), k_(b_.size() - 1) {}

    bool cons(size_t i) const {
        switch (b_[i]) {
            case 'a': case 'e': case 'i': case 'o': case 'u':
                return false;
            case 'y':
                return i == 0 ? true : !cons(i - 1);
            default:
                return true;
        }
    }

    // Measure of b[0..j]: the m in [C](VC)^m[V].
    size_t measure() const {
        size_t n = 0, i = 0;
        while (true) {
            if (i > j_) return n;
            if (!cons(i)) break;
            ++i;
        }
        ++i;
        while (true) {
            while (true) {
                if (i > j_) return n;
                if (cons(i)) break;
                ++i;
            }
            ++i;
            ++n;
            while (true) {
                if (i > j_) return n;
                if (!cons(i)) break;
                ++i;
            }
            ++i;
        }
    }

    bool vowel_in_stem() const {
        for (size_t i = 0; i <= j_; ++i)
            if (!cons(i)) return true;
        return false;
    }

    bool double_cons(size_t i) const {
        if (i < 1) return false;
        if (b_[i] != b_[i - 1]) return false;
        return cons(i);
    }

    // cvc at i with the final consonant not w, x or y (the *o condition).
    bool cvc(size_t i) const {
        if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
        char ch = b_[i];
        return ch != 'w' && ch != 'x' && ch != 'y';
    }

    bool ends(std::string_view s) {
        if (s.size() > k_) return false;  // the stem must keep at least one letter
        if (b_.compare(k_ + 1 - s.size(), s.size(), s) != 0) return false;
        j_ = k_ - s.size();
        return true;
    }

    void set_to(std::string_view s) {
        b_.replace(j_ + 1, k_ - j_, s);
        k_ = j_ + s.size();
    }

    void replace_if_m(std::string_view s) {
        if (measure() > 0) set_to(s);
    }

    void step1ab() {
        if (b_[k_] == 's') {
            if (ends("sses")) k_ -= 2;
            else if (ends("ies")) set_to("i");
            else if (b_[k_ - 1] != 's') --k_;
        }
        if (ends("eed")) {
            if (measure() > 0) --k_;
        } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
            k_ = j_;
            if (ends("at")) set_to("ate");
            else if (ends("bl")) set_to("ble");
            else if (ends("iz")) set_to("ize");
            else if (double_cons(k_)) {
                --k_;
                char ch = b_[k_];
                if (ch == 'l' || ch == 's' || ch == 'z') ++k_;
            } else {
                j_ = k_;
                if (measure() == 1 && cvc(k_)) set_to("e");
            }
        }
    }

    void step1c() {
        if (ends("y") && vowel_in_stem()) b_[k_] = 'i';
    }

    void step2() {
        if (k_ < 1) return;
        switch (b_[k_ - 1]) {
            case 'a':
                if (ends("ational")) replace_if_m("ate");
                else if (ends("tional")) replace_if_m("tion");
                break;
            case 'c':
                if (ends("enci")) replace_if_m("ence");
                else if (ends("anci")) replace_if_m("ance");
                break;
            case 'e':
                if (ends("izer")) replace_if_m("ize");
                break;
            case 'l':
                if (ends("abli")) replace_if_m("able");
                else if (ends("alli")) replace_if_m("al");
                else if (ends("entli")) replace_if_m("ent");
                else if (ends("eli")) replace_if_m("e");
                else if (ends("ousli")) replace_if_m("ous");
                break;
            case 'o':
                if (ends("ization")) replace_if_m("ize");
                else if (ends("ation")) replace_if_m("ate");
                else if (ends("ator")) replace_if_m("ate");
                break;
            case 's':
                if (ends("alism")) replace_if_m("al");
                else if (ends("iveness")) replace_if_m("ive");
                else if (ends("fulness")) replace_if_m("ful");
                else if (ends("ousness")) replace_if_m("ous");
                break;
            case 't':
                if (ends("aliti")) replace_if_m("al");
                else if (ends("iviti")) replace_if_m("ive");
                else if (ends("biliti")) replace_if_m("ble");
                break;
            default:
                break;
        }
    }

    void step3() {
        switch (b_[k_]) {
            case 'e':
                if (ends("icate")) replace_if_m("ic");
                else if (ends("ative")) replace_if_m("");
                else if (ends("alize")) replace_if_m("al");
                break;
            case 'i':
                if (ends("iciti")) replace_if_m("ic");
                break;
            case 'l':
                if (ends("ical")) replace_if_m("ic");
                else if (ends("ful")) replace_if_m("");
                break;
            case 's':
                if (ends("ness")) replace_if_m("");
                break;
            default:
                break;
        }
    }

    void step4() {
        if (k_ < 1) return;
        bool matched = false;
        switch (b_[k_ - 1]) {
            case 'a': matched = ends("al"); break;
            case 'c': matched = ends("ance") || ends("ence"); break;
            case 'e': matched = ends("er"); break;
            case 'i': matched = ends("ic"); break;
            case 'l': matched = ends("able") || ends("ible"); break;
            case 'n': matched = ends("ant") || ends("ement") || ends("ment") || ends("ent"); break;
            case 'o':
                matched = (ends("ion") && (b_[j_] == 's' || b_[j_] == 't')) || ends("ou");
                break;
            case 's': matched = ends("ism"); break;
            case 't': matched = ends("ate") || ends("iti"); break;
            case 'u': matched = ends("ous"); break;
            case 'v': matched = ends("ive"); break;
            case 'z': matched = ends("ize"); break;
            default: break;
        }
        if (matched && measure() > 1) k_ = j_;
    }

    void step5() {
        j_ = k_;
        if (b_[k_] == 'e') {
            size_t m = measure();
            if (m > 1 || (m == 1 && !cvc(k_ - 1))) --k_;
        }
        if (b_[k_] == 'l' && double_cons(k_) && measure() > 1) --k_;
    }

    std::string b_;
    size_t k_;       // index of last letter of the current word
    size_t j_ = 0;   // index of last letter of the stem a rule matched against
};

enum class Stemmer { none, english_porter };

inline const char* to_string(Stemmer s) {
    return s == Stemmer::english_porter ? "english-porter" : "none";
}

inline Stemmer stemmer_from_string(std::string_view s) {
    if (s == "none") return Stemmer::none;
    if (s == "english-porter" || s == "porter") return Stemmer::english_porter;
    throw Error("unknown stemmer: '" + std::string(s) + "'");
}

// Deterministic: the same config and text always produce the same tokens.
struct TokenizerConfig {
    bool lowercase = true;
    std::set<std::string> stopword_list;  // matched after lowercasing
    Stemmer stemmer = Stemmer::none;

    // Lucene's classic English stopword set; small and uncontroversial.
    static const std::set<std::string>& english_stopwords() {
        static const std::set<std::string> words = {
            "a",    "an",   "and",  "are",  "as",    "at",   "be",   "but", "by",
            "for",  "if",   "in",   "into", "is",    "it",   "no",   "not", "of",
            "on",   "or",   "such", "that", "the",   "their", "then", "there",
            "these", "they", "this", "to",  "was",   "will", "with"};
        return words;
    }
};

// Splits on ASCII non-alphanumeric boundaries (bytes >= 0x80 are kept, so
// UTF-8 sequences survive intact), then lowercases, drops stopwords and stems
// per config, in that order.
inline std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& config) {
    std::vector<std::string> tokens;
    size_t i = 0;
    auto is_token_char = [](unsigned char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
    };
    while (i < text.size()) {
        while (i < text.size() && !is_token_char(static_cast<unsigned char>(text[i]))) ++i;
        size_t start = i;
        while (i < text.size() && is_token_char(static_cast<unsigned char>(text[i]))) ++i;
        if (i == start) continue;
        std::string token(text.substr(start, i - start));
        if (config.lowercase) token = lowercase_ascii(token);
        if (!config.stopword_list.empty() && config.stopword_list.count(token)) continue;
        if (config.stemmer == Stemmer::english_porter) {
            bool plain = !token.empty();
            for (char c : token)
                if (c < 'a' || c > 'z') { plain = false; break; }
            if (plain) token = PorterStemmer::stem(std::move(token));
        }
        tokens.push_back(std::move(token));
    }
    return tokens;
}

}  // namespace amd
