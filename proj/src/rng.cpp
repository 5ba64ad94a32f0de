#include "hlic/rng.hpp"

#include <istream>
#include <ostream>

#include "hlic/error.hpp"
#include "hlic/textio.hpp"

namespace hlic {

void Rng::save(std::ostream& os) const {
  os << engine_ << '\n';
  os << (has_cached_ ? 1 : 0) << ' ' << format_double(cached_) << '\n';
}

void Rng::load(std::istream& is) {
  is >> engine_;
  int flag = 0;
  double cached = 0.0;
  is >> flag >> cached;
  if (!is) throw InvalidInput("rng state: truncated or malformed");
  has_cached_ = flag != 0;
  cached_ = cached;
}

}  // namespace hlic
