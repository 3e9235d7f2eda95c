#include "pfcast/seqnet.hpp"

namespace pfcast::seqnet::reference {

Gradient backward_serial(const SeqNetModel& m, const SequenceSet& s, std::span<const std::size_t> rows,
                         double l2_lambda) {
  Gradient out;
  out.grad.assign(m.weights().size(), 0.0);
  detail::Workspace ws;
  const double scale = rows.empty() ? 0.0 : 1.0 / static_cast<double>(rows.size());
  double sq = 0.0;
  for (auto r : rows) {
    sq += detail::accumulate_sample(m, s.dynamic_of(r), s.window, s.static_of(r), s.target[r], scale, out.grad, ws);
  }
  out.loss = sq * scale;
  detail::add_l2(m, l2_lambda, out);
  return out;
}

}  // namespace pfcast::seqnet::reference
