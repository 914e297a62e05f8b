# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled corpus-scan kernel.

Walks lowercased UTF-8 bytes through a dense Aho-Corasick DFA, segmenting
sentences at `.`, `!`, `?` and newlines (automaton state resets there, so
phrases never match across sentence ends). Emits one (sentence, phrase)
event per sentence a phrase occurs in, with word boundaries enforced:
a match only counts when not flanked by ASCII letters.

Callers must feed chunks that start at a sentence start and end at a
sentence delimiter (or end of file), so no match or boundary check ever
spans two calls.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def scan_chunk(
    const unsigned char[::1] data,
    const int[::1] delta,
    const int[::1] out_offsets,
    const int[::1] out_phrases,
    const unsigned char[::1] has_out,
    const int[::1] phrase_lengths,
    long long[::1] last_seen,
    long long sid,
    int state,
):
    """Scan one chunk; returns (sentence_ids, phrase_ids, end_sid, end_state).

    ``last_seen`` carries per-phrase sentence dedup across chunks of one
    file; ``sid`` and ``state`` thread the running sentence id and automaton
    state through successive calls.
    """
    cdef Py_ssize_t n = data.shape[0]
    cdef Py_ssize_t i, j, start
    cdef int c, start_offset, end_offset, pid
    cdef unsigned char prev_byte, next_byte
    cdef Py_ssize_t capacity = 1024
    cdef Py_ssize_t n_events = 0

    sids = np.empty(capacity, dtype=np.int64)
    pids = np.empty(capacity, dtype=np.int32)
    cdef long long[::1] sids_view = sids
    cdef int[::1] pids_view = pids

    for i in range(n):
        c = data[i]
        if c == 46 or c == 33 or c == 63 or c == 10:  # . ! ? \n
            sid += 1
            state = 0
            continue
        state = delta[state * 256 + c]
        if has_out[state]:
            start_offset = out_offsets[state]
            end_offset = out_offsets[state + 1]
            for j in range(start_offset, end_offset):
                pid = out_phrases[j]
                if last_seen[pid] == sid:
                    continue
                start = i + 1 - phrase_lengths[pid]
                if start > 0:
                    prev_byte = data[start - 1]
                    if 97 <= prev_byte <= 122:  # a-z
                        continue
                if i + 1 < n:
                    next_byte = data[i + 1]
                    if 97 <= next_byte <= 122:
                        continue
                last_seen[pid] = sid
                if n_events == capacity:
                    capacity *= 2
                    sids = np.resize(sids, capacity)
                    pids = np.resize(pids, capacity)
                    sids_view = sids
                    pids_view = pids
                sids_view[n_events] = sid
                pids_view[n_events] = pid
                n_events += 1

    return sids[:n_events].copy(), pids[:n_events].copy(), sid, state
