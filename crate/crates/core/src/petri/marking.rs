use std::cmp::Ordering;

/// A token: one object in one place. Packed into a `u64` so that the
/// derived order is (place, object).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(u64);

impl Token {
    pub fn new(place: usize, object: u32) -> Self {
        Token(((place as u64) << 32) | object as u64)
    }

    pub fn place(self) -> usize {
        (self.0 >> 32) as usize
    }

    pub fn object(self) -> u32 {
        self.0 as u32
    }
}

/// A multiset of tokens kept as a sorted vector with repeats.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Marking(Vec<Token>);

impl Marking {
    pub fn from_tokens(mut tokens: Vec<Token>) -> Self {
        tokens.sort_unstable();
        Marking(tokens)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self, token: Token) -> usize {
        let lo = self.0.partition_point(|t| *t < token);
        let hi = self.0.partition_point(|t| *t <= token);
        hi - lo
    }

    /// Tokens residing in `place`.
    pub fn in_place(&self, place: usize) -> &[Token] {
        let lo = self.0.partition_point(|t| t.place() < place);
        let hi = self.0.partition_point(|t| t.place() <= place);
        &self.0[lo..hi]
    }

    /// Distinct objects in `place`, ascending.
    pub fn distinct_objects_in(&self, place: usize) -> Vec<u32> {
        let mut v: Vec<u32> = self.in_place(place).iter().map(|t| t.object()).collect();
        v.dedup();
        v
    }

    /// Multiset inclusion `self <= other`.
    pub fn is_sub_multiset_of(&self, other: &Marking) -> bool {
        let mut it = other.0.iter();
        'outer: for t in &self.0 {
            for o in it.by_ref() {
                match o.cmp(t) {
                    Ordering::Less => continue,
                    Ordering::Equal => continue 'outer,
                    Ordering::Greater => return false,
                }
            }
            return false;
        }
        true
    }

    /// Multiset sum.
    pub fn plus(&self, other: &Marking) -> Marking {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            if self.0[i] <= other.0[j] {
                out.push(self.0[i]);
                i += 1;
            } else {
                out.push(other.0[j]);
                j += 1;
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Marking(out)
    }

    /// Multiset difference, `None` unless `other <= self`.
    pub fn minus(&self, other: &Marking) -> Option<Marking> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for t in &self.0 {
            if j < other.0.len() && other.0[j] == *t {
                j += 1;
            } else if j < other.0.len() && other.0[j] < *t {
                return None;
            } else {
                out.push(*t);
            }
        }
        (j == other.0.len()).then_some(Marking(out))
    }

    /// `self - cons + prod`, `None` when `cons` is not contained in `self`.
    pub fn apply(&self, cons: &Marking, prod: &Marking) -> Option<Marking> {
        self.minus(cons).map(|m| m.plus(prod))
    }
}
