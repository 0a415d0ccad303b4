#pragma once

// Closed-vocabulary prompt templates over the 5x5 content/style grid, plus
// the rule-based adverb substitution used to neutralize or stylize prompts.

#include <array>
#include <string>

#include "msd/errors.hpp"

namespace msd {

enum class ContentLabel { walk, run, jump, wave, kick };
enum class StyleLabel { neutral, old, proud, angry, depressed };

inline constexpr size_t kContentCount = 5;
inline constexpr size_t kStyleCount = 5;

inline const char* to_string(ContentLabel c) {
    switch (c) {
        case ContentLabel::walk: return "walk";
        case ContentLabel::run: return "run";
        case ContentLabel::jump: return "jump";
        case ContentLabel::wave: return "wave";
        case ContentLabel::kick: return "kick";
    }
    return "?";
}

inline const char* to_string(StyleLabel s) {
    switch (s) {
        case StyleLabel::neutral: return "neutral";
        case StyleLabel::old: return "old";
        case StyleLabel::proud: return "proud";
        case StyleLabel::angry: return "angry";
        case StyleLabel::depressed: return "depressed";
    }
    return "?";
}

inline ContentLabel content_from_string(const std::string& s) {
    for (size_t i = 0; i < kContentCount; ++i)
        if (s == to_string(ContentLabel(i))) return ContentLabel(i);
    throw ConfigInvalid("unknown content label: " + s);
}

inline StyleLabel style_from_string(const std::string& s) {
    for (size_t i = 0; i < kStyleCount; ++i)
        if (s == to_string(StyleLabel(i))) return StyleLabel(i);
    throw ConfigInvalid("unknown style label: " + s);
}

inline const char* content_gerund(ContentLabel c) {
    switch (c) {
        case ContentLabel::walk: return "walking";
        case ContentLabel::run: return "running";
        case ContentLabel::jump: return "jumping";
        case ContentLabel::wave: return "waving";
        case ContentLabel::kick: return "kicking";
    }
    return "?";
}

// The bidirectional adverb dictionary; each style owns one phrase.
inline const char* style_phrase(StyleLabel s) {
    switch (s) {
        case StyleLabel::neutral: return "neutrally";
        case StyleLabel::old: return "in an old manner";
        case StyleLabel::proud: return "proudly";
        case StyleLabel::angry: return "angrily";
        case StyleLabel::depressed: return "in depression";
    }
    return "?";
}

inline std::string render_prompt(ContentLabel c, StyleLabel s) {
    return std::string("a person is ") + content_gerund(c) + " " + style_phrase(s);
}

namespace detail {

// Replace the first known style phrase in `text` with `replacement`.
inline std::string substitute_style_phrase(const std::string& text,
                                           const std::string& replacement, const char* op) {
    for (size_t i = 0; i < kStyleCount; ++i) {
        std::string phrase = style_phrase(StyleLabel(i));
        size_t pos = text.find(phrase);
        if (pos != std::string::npos)
            return text.substr(0, pos) + replacement + text.substr(pos + phrase.size());
    }
    throw UnknownTemplate(std::string(op) + ": no style vocabulary found in '" + text + "'");
}

}  // namespace detail

inline std::string neutralize_prompt(const std::string& text) {
    return detail::substitute_style_phrase(text, style_phrase(StyleLabel::neutral), "neutralize");
}

inline std::string stylize_prompt(const std::string& text, StyleLabel s) {
    return detail::substitute_style_phrase(text, style_phrase(s), "stylize");
}

}  // namespace msd
