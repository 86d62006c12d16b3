#include "mockless/java/lexer.hpp"

#include <array>
#include <cctype>
#include <unordered_set>

namespace mockless::java {

namespace {

const std::unordered_set<std::string_view>& keywords() {
    static const std::unordered_set<std::string_view> set = {
        "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
        "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally",
        "float", "for", "goto", "if", "implements", "import", "instanceof", "int", "interface",
        "long", "native", "new", "package", "private", "protected", "public", "return", "short",
        "static", "strictfp", "super", "switch", "synchronized", "this", "throw", "throws",
        "transient", "try", "void", "volatile", "while", "true", "false", "null"};
    return set;
}

// Longest first so that maximal munch works with a linear scan.
constexpr std::array<std::string_view, 40> kPuncts = {
    "<<=", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", "+=", "-=", "*=",
    "/=", "%=", "&=", "|=", "^=", "<<", "(", ")", "{", "}", "[", "]", ";", ",", ".",
    "@", "=", "<", ">", "!", "~", "?", ":", "+", "-", "*"};
constexpr std::array<std::string_view, 5> kSingles = {"/", "&", "|", "^", "%"};

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c == '$' || c >= 0x80; }
bool ident_part(unsigned char c) { return std::isalnum(c) || c == '_' || c == '$' || c >= 0x80; }

}  // namespace

bool is_keyword(std::string_view word) { return keywords().count(word) != 0; }

bool is_literal_token(const Token& tok) {
    switch (tok.kind) {
        case TokenKind::IntLiteral:
        case TokenKind::FloatLiteral:
        case TokenKind::StringLiteral:
        case TokenKind::CharLiteral:
            return true;
        case TokenKind::Identifier:
            return tok.text == "true" || tok.text == "false" || tok.text == "null";
        default:
            return false;
    }
}

std::vector<Token> tokenize(std::string_view src, int first_line) {
    std::vector<Token> out;
    std::size_t i = 0;
    int line = first_line;
    std::size_t line_start = 0;
    bool space = false;

    auto advance_newlines = [&](std::size_t from, std::size_t to) {
        for (std::size_t k = from; k < to; ++k) {
            if (src[k] == '\n') {
                ++line;
                line_start = k + 1;
            }
        }
    };

    while (i < src.size()) {
        unsigned char c = static_cast<unsigned char>(src[i]);
        if (std::isspace(c)) {
            if (c == '\n') {
                ++line;
                line_start = i + 1;
            }
            ++i;
            space = true;
            continue;
        }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
            while (i < src.size() && src[i] != '\n') ++i;
            space = true;
            continue;
        }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
            auto end = src.find("*/", i + 2);
            if (end == std::string_view::npos)
                throw ParseError("unterminated comment", line, static_cast<int>(i - line_start) + 1);
            advance_newlines(i, end + 2);
            i = end + 2;
            space = true;
            continue;
        }

        Token tok;
        tok.line = line;
        tok.column = static_cast<int>(i - line_start) + 1;
        tok.offset = i;
        tok.space_before = space;
        space = false;

        if (ident_start(c)) {
            std::size_t j = i + 1;
            while (j < src.size() && ident_part(static_cast<unsigned char>(src[j]))) ++j;
            tok.kind = TokenKind::Identifier;
            tok.text = std::string(src.substr(i, j - i));
            i = j;
        } else if (std::isdigit(c) || (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t j = i;
            bool is_float = false;
            if (c == '0' && j + 1 < src.size() && (src[j + 1] == 'x' || src[j + 1] == 'X' || src[j + 1] == 'b' || src[j + 1] == 'B')) {
                j += 2;
                while (j < src.size() && (std::isxdigit(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            } else {
                while (j < src.size()) {
                    char d = src[j];
                    if (std::isdigit(static_cast<unsigned char>(d)) || d == '_') {
                        ++j;
                    } else if (d == '.' && j + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
                        is_float = true;
                        ++j;
                    } else if (d == '.' && !is_float && (j + 1 >= src.size() || !ident_start(static_cast<unsigned char>(src[j + 1])))) {
                        is_float = true;
                        ++j;
                    } else if ((d == 'e' || d == 'E') && j + 1 < src.size()) {
                        is_float = true;
                        ++j;
                        if (src[j] == '+' || src[j] == '-') ++j;
                    } else {
                        break;
                    }
                }
            }
            if (j < src.size() && std::string_view("lLfFdD").find(src[j]) != std::string_view::npos) {
                if (src[j] != 'l' && src[j] != 'L') is_float = true;
                ++j;
            }
            tok.kind = is_float ? TokenKind::FloatLiteral : TokenKind::IntLiteral;
            tok.text = std::string(src.substr(i, j - i));
            i = j;
        } else if (c == '"') {
            std::size_t j;
            if (src.substr(i, 3) == "\"\"\"") {
                auto end = src.find("\"\"\"", i + 3);
                if (end == std::string_view::npos)
                    throw ParseError("unterminated text block", line, tok.column);
                j = end + 3;
            } else {
                j = i + 1;
                while (j < src.size() && src[j] != '"') {
                    if (src[j] == '\\') ++j;
                    if (j < src.size() && src[j] == '\n')
                        throw ParseError("unterminated string literal", line, tok.column);
                    ++j;
                }
                if (j >= src.size()) throw ParseError("unterminated string literal", line, tok.column);
                ++j;
            }
            tok.kind = TokenKind::StringLiteral;
            tok.text = std::string(src.substr(i, j - i));
            advance_newlines(i, j);
            i = j;
        } else if (c == '\'') {
            std::size_t j = i + 1;
            while (j < src.size() && src[j] != '\'') {
                if (src[j] == '\\') ++j;
                ++j;
            }
            if (j >= src.size()) throw ParseError("unterminated char literal", line, tok.column);
            ++j;
            tok.kind = TokenKind::CharLiteral;
            tok.text = std::string(src.substr(i, j - i));
            i = j;
        } else {
            std::string_view rest = src.substr(i);
            std::string_view match;
            for (auto p : kPuncts) {
                if (rest.substr(0, p.size()) == p) {
                    match = p;
                    break;
                }
            }
            if (match.empty()) {
                for (auto p : kSingles) {
                    if (rest.substr(0, 1) == p) match = p;
                }
            }
            if (match.empty()) throw ParseError(std::string("unexpected character '") + static_cast<char>(c) + "'", line, tok.column);
            tok.kind = TokenKind::Punct;
            tok.text = std::string(match);
            i += match.size();
        }
        out.push_back(std::move(tok));
    }
    Token end;
    end.kind = TokenKind::End;
    end.line = line;
    end.column = static_cast<int>(i - line_start) + 1;
    end.offset = src.size();
    out.push_back(end);
    return out;
}

std::string render_tokens(const std::vector<Token>& tokens, std::size_t begin, std::size_t end) {
    std::string out;
    auto word_like = [](const Token& t) {
        return t.kind != TokenKind::Punct && t.kind != TokenKind::End;
    };
    for (std::size_t i = begin; i < end && i < tokens.size(); ++i) {
        const Token& t = tokens[i];
        if (t.kind == TokenKind::End) break;
        if (i > begin) {
            const Token& prev = tokens[i - 1];
            bool need_space = false;
            if (word_like(prev) && word_like(t)) {
                need_space = true;
            } else if (t.space_before) {
                static const std::unordered_set<std::string_view> tight_after = {"(", "[", ".", "@", "!", "~", "::"};
                static const std::unordered_set<std::string_view> tight_before = {")", "]", ";", ",", ".", "(", "[", "::", "++", "--"};
                bool prev_tight = prev.kind == TokenKind::Punct && tight_after.count(prev.text);
                bool cur_tight = t.kind == TokenKind::Punct && tight_before.count(t.text);
                need_space = !prev_tight && !cur_tight;
                if (t.text == "(" && prev.kind == TokenKind::Punct && prev.text != "(") need_space = true;
                if (t.text == "(" && word_like(prev) && (prev.text == "if" || prev.text == "for" || prev.text == "while" || prev.text == "catch" || prev.text == "switch")) need_space = true;
            }
            if (need_space) out += ' ';
        }
        out += t.text;
    }
    return out;
}

}  // namespace mockless::java
