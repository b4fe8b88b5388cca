#pragma once

#include <string>
#include <string_view>

namespace calagent::detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // no trailing slash, may be empty
};

inline SplitUrl split_url(std::string_view url) {
  SplitUrl out;
  const auto scheme_end = url.find("://");
  const auto host_begin = scheme_end == std::string_view::npos ? 0 : scheme_end + 3;
  const auto slash = url.find('/', host_begin);
  if (slash == std::string_view::npos) {
    out.origin = std::string(url);
  } else {
    out.origin = std::string(url.substr(0, slash));
    out.path = std::string(url.substr(slash));
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  }
  return out;
}

}  // namespace calagent::detail
