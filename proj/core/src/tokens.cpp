#include "safepatch/tokens.hpp"

#include <sstream>

namespace safepatch {

std::string tokens_str(const std::vector<int>& tokens) {
    std::ostringstream os;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) os << " ";
        os << tokens[i];
    }
    return os.str();
}

std::vector<int> parse_token_list(const std::string& text) {
    std::vector<int> out;
    std::istringstream is(text);
    int v;
    while (is >> v) out.push_back(v);
    if (!is.eof())
        throw InvalidTokenError("parse_token_list: non-integer in '" + text + "'");
    return out;
}

std::string PromptTokens::str() const {
    return tokens_str(tokens);
}

std::string SafetyCondition::str() const {
    return tokens_str(tokens);
}

} // namespace safepatch
