#include "gamenet/data.hpp"

#include <algorithm>
#include <cctype>

namespace gamenet::data {

namespace {

std::string collapse_spaces(std::string_view line)
{
    std::string out;
    out.reserve(line.size());
    bool pending = false;
    for (char c : line) {
        if (c == ' ' || c == '\t') {
            pending = !out.empty();
            continue;
        }
        if (pending)
            out.push_back(' ');
        pending = false;
        out.push_back(c);
    }
    return out;
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

void trim_right(std::string& s)
{
    while (!s.empty() && s.back() == ' ')
        s.pop_back();
}

/// Strips one trailing "[xN]" (N >= 1 digits). Returns N, or 0 if absent.
std::size_t strip_repeat_marker(std::string& line)
{
    if (line.size() < 4 || line.back() != ']')
        return 0;
    const std::size_t open = line.rfind('[');
    if (open == std::string::npos || open + 3 > line.size() - 1)
        return 0;
    if (line[open + 1] != 'x' && line[open + 1] != 'X')
        return 0;
    std::size_t n = 0;
    for (std::size_t i = open + 2; i + 1 < line.size(); ++i) {
        const char c = line[i];
        if (c < '0' || c > '9')
            return 0;
        n = std::min<std::size_t>(n * 10 + static_cast<std::size_t>(c - '0'), 1'000'000);
    }
    if (n == 0)
        return 0;
    line.erase(open);
    trim_right(line);
    return n;
}

bool annotation_only(const std::string& line, const LyricsConfig& cfg)
{
    if (line.empty())
        return false;
    std::size_t i = 0;
    while (i < line.size()) {
        if (line[i] == ' ') {
            ++i;
            continue;
        }
        if (line[i] != '[')
            return false;
        const std::size_t close = line.find(']', i);
        if (close == std::string::npos)
            return false;
        std::string inner = collapse_spaces(std::string_view(line).substr(i + 1, close - i - 1));
        trim_right(inner);
        if (!cfg.annotations.contains(lower(inner)))
            return false;
        i = close + 1;
    }
    return true;
}

} // namespace

std::string normalize_lyrics(std::string_view text, const LyricsConfig& cfg)
{
    std::vector<std::string> lines;
    std::string current;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n')
                ++i;
            lines.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    lines.push_back(std::move(current));

    std::vector<std::string> out;
    for (const auto& raw : lines) {
        std::string line = collapse_spaces(raw);
        std::size_t copies = 1;
        while (std::size_t n = strip_repeat_marker(line))
            copies = std::min(copies * std::min(n, cfg.max_repeat), cfg.max_repeat);
        if (annotation_only(line, cfg))
            continue;
        if (line.empty()) {
            if (copies == 1)
                out.emplace_back();
            continue;
        }
        for (std::size_t k = 0; k < copies; ++k)
            out.push_back(line);
    }

    while (!out.empty() && out.front().empty())
        out.erase(out.begin());
    while (!out.empty() && out.back().empty())
        out.pop_back();
    std::string joined;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (i)
            joined.push_back('\n');
        joined += out[i];
    }
    return joined;
}

} // namespace gamenet::data
