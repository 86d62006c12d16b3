#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mockless::java {

enum class TokenKind { Identifier, IntLiteral, FloatLiteral, StringLiteral, CharLiteral, Punct, End };

struct Token {
    TokenKind kind = TokenKind::End;
    std::string text;
    int line = 0;
    int column = 0;
    std::size_t offset = 0;  // byte offset of the first character
    bool space_before = false;  // whitespace or comment precedes this token
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, int line, int column)
        : std::runtime_error(message + " at " + std::to_string(line) + ":" + std::to_string(column)),
          line_(line), column_(column) {}
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// Tokenizes Java source. Comments and whitespace are dropped; `>` is always a
/// single-character token so generic closers never need splitting. The last
/// token is always End.
std::vector<Token> tokenize(std::string_view source, int first_line = 1);

bool is_keyword(std::string_view word);
bool is_literal_token(const Token& tok);

/// Joins tokens back into compact, readable source text.
std::string render_tokens(const std::vector<Token>& tokens, std::size_t begin, std::size_t end);

}  // namespace mockless::java
