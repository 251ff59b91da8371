#ifndef QIDFAIR_QIDFAIR_HPP
#define QIDFAIR_QIDFAIR_HPP

#include "qidfair/dataset.hpp"
#include "qidfair/debug.hpp"
#include "qidfair/error.hpp"
#include "qidfair/kmeans.hpp"
#include "qidfair/network.hpp"
#include "qidfair/network_io.hpp"
#include "qidfair/pipeline.hpp"
#include "qidfair/qid.hpp"
#include "qidfair/report_io.hpp"
#include "qidfair/search.hpp"
#include "qidfair/synthetic.hpp"
#include "qidfair/training.hpp"

#endif  // QIDFAIR_QIDFAIR_HPP
