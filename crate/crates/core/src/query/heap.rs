//! Min skew heap.

struct Node<T> {
    item: T,
    left: Option<Box<Node<T>>>,
    right: Option<Box<Node<T>>>,
}

/// Self-adjusting binary min-heap. Melding walks the right spines and swaps
/// children on the way back up; both meld and drop are iterative so long
/// spines cannot overflow the stack.
pub struct SkewHeap<T: Ord> {
    root: Option<Box<Node<T>>>,
    len: usize,
}

impl<T: Ord> Default for SkewHeap<T> {
    fn default() -> Self {
        SkewHeap { root: None, len: 0 }
    }
}

impl<T: Ord> SkewHeap<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, item: T) {
        let single = Some(Box::new(Node {
            item,
            left: None,
            right: None,
        }));
        self.root = meld(self.root.take(), single);
        self.len += 1;
    }

    pub fn peek(&self) -> Option<&T> {
        self.root.as_ref().map(|n| &n.item)
    }

    pub fn pop(&mut self) -> Option<T> {
        let mut top = self.root.take()?;
        self.root = meld(top.left.take(), top.right.take());
        self.len -= 1;
        Some(top.item)
    }

    /// Moves every element of `other` into `self`.
    pub fn append(&mut self, other: &mut SkewHeap<T>) {
        self.root = meld(self.root.take(), other.root.take());
        self.len += std::mem::take(&mut other.len);
    }
}

fn meld<T: Ord>(mut a: Option<Box<Node<T>>>, mut b: Option<Box<Node<T>>>) -> Option<Box<Node<T>>> {
    let mut spine: Vec<Box<Node<T>>> = Vec::new();
    let mut acc = loop {
        match (a, b) {
            (None, rest) | (rest, None) => break rest,
            (Some(x), Some(y)) => {
                let (mut top, other) = if x.item <= y.item { (x, y) } else { (y, x) };
                a = top.right.take();
                b = Some(other);
                spine.push(top);
            }
        }
    };
    while let Some(mut n) = spine.pop() {
        n.right = n.left.take();
        n.left = acc;
        acc = Some(n);
    }
    acc
}

impl<T: Ord> Drop for SkewHeap<T> {
    fn drop(&mut self) {
        let mut stack: Vec<Box<Node<T>>> = self.root.take().into_iter().collect();
        while let Some(mut n) = stack.pop() {
            stack.extend(n.left.take());
            stack.extend(n.right.take());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sorted_output() {
        let mut h = SkewHeap::new();
        for x in [5, 1, 4, 1, 3, 9, 2] {
            h.push(x);
        }
        assert_eq!(h.len(), 7);
        assert_eq!(h.peek(), Some(&1));
        let out: Vec<_> = std::iter::from_fn(|| h.pop()).collect();
        assert_eq!(out, [1, 1, 2, 3, 4, 5, 9]);
        assert!(h.is_empty());
    }

    #[test]
    fn long_spine_does_not_overflow() {
        let mut h = SkewHeap::new();
        for x in (0..200_000).rev() {
            h.push(x);
        }
        for x in 0..200_000 {
            h.push(x);
        }
        assert_eq!(h.pop(), Some(0));
        drop(h);
    }

    proptest! {
        #[test]
        fn matches_sorting(xs in prop::collection::vec(any::<i32>(), 0..300), ys in prop::collection::vec(any::<i32>(), 0..50)) {
            let mut h = SkewHeap::new();
            let mut other = SkewHeap::new();
            xs.iter().for_each(|&x| h.push(x));
            ys.iter().for_each(|&y| other.push(y));
            h.append(&mut other);
            prop_assert!(other.is_empty());
            let mut expected: Vec<i32> = xs.iter().chain(&ys).copied().collect();
            expected.sort();
            let got: Vec<i32> = std::iter::from_fn(|| h.pop()).collect();
            prop_assert_eq!(got, expected);
        }
    }
}
