use std::ops::Range;

/// Dense per-site storage over a contiguous, growable range of integers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SiteTable<T> {
    lo: i64,
    data: Vec<T>,
}

impl<T: Copy + Default> SiteTable<T> {
    pub fn new() -> Self {
        SiteTable { lo: 0, data: Vec::new() }
    }

    pub fn range(&self) -> Range<i64> {
        self.lo..self.lo + self.data.len() as i64
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, site: i64) -> Option<T> {
        let i = site.wrapping_sub(self.lo);
        if i >= 0 && (i as usize) < self.data.len() {
            Some(self.data[i as usize])
        } else {
            None
        }
    }

    /// Value at `site`, or `T::default()` outside the stored range.
    #[inline]
    pub fn value(&self, site: i64) -> T {
        self.get(site).unwrap_or_default()
    }

    /// Mutable slot for `site`, growing the range with default values.
    #[inline]
    pub fn slot(&mut self, site: i64) -> &mut T {
        self.cover(site);
        let i = (site - self.lo) as usize;
        &mut self.data[i]
    }

    /// Grows the range so that it contains `site`. Growth to the left
    /// over-allocates geometrically so repeated leftward extension is
    /// amortised.
    pub fn cover(&mut self, site: i64) {
        if self.data.is_empty() {
            self.lo = site;
            self.data.push(T::default());
            return;
        }
        let hi = self.lo + self.data.len() as i64;
        if site >= hi {
            self.data.resize((site - self.lo + 1) as usize, T::default());
        } else if site < self.lo {
            let need = (self.lo - site) as usize;
            let extra = need.max(self.data.len() / 2).max(16);
            let mut grown = vec![T::default(); extra];
            grown.extend_from_slice(&self.data);
            self.data = grown;
            self.lo -= extra as i64;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, T)> + '_ {
        let lo = self.lo;
        self.data.iter().enumerate().map(move |(i, &v)| (lo + i as i64, v))
    }

    /// Values for the sites in `range`, defaults where nothing is stored.
    pub fn window(&self, range: Range<i64>) -> impl Iterator<Item = T> + '_ {
        range.map(move |x| self.value(x))
    }
}
