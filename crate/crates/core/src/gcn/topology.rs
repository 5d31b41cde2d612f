//! Dual-ring slot layout for the contour decoder.
//!
//! The decoder works on two closed rings of equal size:
//!
//! - the **inner ring** holds the endocardial chain followed by the
//!   left-atrial chain in *reverse* order, so walking the slots
//!   `A → … → E → … → B → la[last] → … → la[0] → (A)` traces the closed
//!   LV-cavity + LA boundary once and the circular neighborhood of slot 0
//!   is anatomically meaningful;
//! - the **outer ring** holds the epicardial chain in slots aligned with the
//!   corresponding endocardial slots; the slots facing the LA have no
//!   anatomical counterpart and are *padding* whose embeddings are pinned to
//!   zero between layers.
//!
//! Both rings have `(2·n_side + 3) + (2·m_side + 1)` slots.

use crate::keypoints::SamplingConfig;

/// Version tag written into model files; bump when the slot layout changes.
pub const TOPOLOGY_VERSION: u32 = 1;

/// What an inner-ring slot holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSlot {
    /// Index into the endocardial array (A → E → B order).
    Endo(usize),
    /// Index into the left-atrial array (A-side → G → B-side order).
    La(usize),
}

/// What an outer-ring slot holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterSlot {
    /// Index into the epicardial array (C → F → D order).
    Epi(usize),
    /// Zero-padded slot facing the left atrium.
    Pad,
}

/// Slot layout shared by every ring layer of a decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RingTopology {
    n_side: usize,
    m_side: usize,
}

impl RingTopology {
    pub fn new(sampling: &SamplingConfig) -> Self {
        RingTopology { n_side: sampling.n_side, m_side: sampling.m_side }
    }

    /// Number of slots in each ring (inner and outer are equal by design).
    pub fn ring_size(&self) -> usize {
        self.endo_len() + self.la_len()
    }

    pub fn endo_len(&self) -> usize {
        2 * self.n_side + 3
    }

    pub fn la_len(&self) -> usize {
        2 * self.m_side + 1
    }

    /// Source of inner-ring slot `i`.
    ///
    /// Slots `0..endo_len` are the endo chain in order; the remaining slots
    /// are the LA chain reversed (`la[la_len-1]` right after B, `la[0]` right
    /// before A) so the ring closes where the chains meet at the annulus.
    pub fn inner_slot(&self, i: usize) -> InnerSlot {
        assert!(i < self.ring_size(), "inner slot {i} out of range");
        let e = self.endo_len();
        if i < e {
            InnerSlot::Endo(i)
        } else {
            InnerSlot::La(self.la_len() - 1 - (i - e))
        }
    }

    /// Source of outer-ring slot `i`: epi for the first `endo_len` slots,
    /// padding for the rest.
    pub fn outer_slot(&self, i: usize) -> OuterSlot {
        assert!(i < self.ring_size(), "outer slot {i} out of range");
        if i < self.endo_len() {
            OuterSlot::Epi(i)
        } else {
            OuterSlot::Pad
        }
    }

    /// Inner-ring slot that holds `endo[k]`.
    pub fn slot_of_endo(&self, k: usize) -> usize {
        assert!(k < self.endo_len());
        k
    }

    /// Inner-ring slot that holds `la[k]`.
    pub fn slot_of_la(&self, k: usize) -> usize {
        assert!(k < self.la_len());
        self.endo_len() + (self.la_len() - 1 - k)
    }

    /// Outer-ring slot that holds `epi[k]`.
    pub fn slot_of_epi(&self, k: usize) -> usize {
        assert!(k < self.endo_len());
        k
    }

    /// True for outer-ring pad slots.
    pub fn is_pad(&self, i: usize) -> bool {
        matches!(self.outer_slot(i), OuterSlot::Pad)
    }
}
