pub mod g2;
pub mod oracle;
pub mod simulate;
pub mod steering;
