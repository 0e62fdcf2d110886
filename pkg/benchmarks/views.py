from django_filters.rest_framework import DjangoFilterBackend
from drf_spectacular.utils import OpenApiParameter, OpenApiResponse, extend_schema
from rest_framework import filters, generics, permissions

from utils.pagination import StandardResultsSetPagination

from .filters import VerificationRunFilter
from .models import VerificationRun
from .serializers import VerificationRunSerializer


class VerificationRunListView(generics.ListAPIView):
    """
    List recorded verification runs
    """
    queryset = VerificationRun.objects.all()
    serializer_class = VerificationRunSerializer
    permission_classes = [permissions.AllowAny]
    pagination_class = StandardResultsSetPagination
    filter_backends = [DjangoFilterBackend, filters.SearchFilter, filters.OrderingFilter]
    filterset_class = VerificationRunFilter
    search_fields = ['benchmark', 'error']
    ordering_fields = ['created_at', 'wall_time_s', 'final_volume']
    ordering = ['-created_at']

    @extend_schema(
        summary="List verification runs",
        description="Paginated ledger of `verify --record` runs with filtering and ordering",
        parameters=[
            OpenApiParameter(name='benchmark', description='Filter by benchmark name'),
            OpenApiParameter(name='mode', description='concrete, symbolic, or an exact mode such as symbolic(3)'),
            OpenApiParameter(name='exit_code', description='0 verified, 1 falsified candidate, 2 unknown or error'),
            OpenApiParameter(name='ordering', description='Order by: created_at, wall_time_s, final_volume'),
        ],
        responses={200: VerificationRunSerializer(many=True)}
    )
    def get(self, request, *args, **kwargs):
        return super().get(request, *args, **kwargs)


class VerificationRunDetailView(generics.RetrieveAPIView):
    """
    Retrieve a recorded run
    """
    queryset = VerificationRun.objects.all()
    serializer_class = VerificationRunSerializer
    permission_classes = [permissions.AllowAny]

    @extend_schema(
        summary="Get verification run",
        description="Verdicts, final box and timing of a single run",
        responses={
            200: VerificationRunSerializer,
            404: OpenApiResponse(description="Run not found"),
        }
    )
    def get(self, request, *args, **kwargs):
        return super().get(request, *args, **kwargs)
