"""add_run_error

Revision ID: 8c1d5e7a2b93
Revises: 3b9e1c2a7f40
Create Date: 2026-10-20 09:31:07.553120

"""
from typing import Sequence, Union

from alembic import op
import sqlalchemy as sa


# revision identifiers, used by Alembic.
revision: str = '8c1d5e7a2b93'
down_revision: Union[str, Sequence[str], None] = '3b9e1c2a7f40'
branch_labels: Union[str, Sequence[str], None] = None
depends_on: Union[str, Sequence[str], None] = None


def upgrade() -> None:
    """Upgrade schema."""
    op.add_column('runs', sa.Column('error', sa.Text(), nullable=True))


def downgrade() -> None:
    """Downgrade schema."""
    op.drop_column('runs', 'error')
